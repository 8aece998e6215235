#include "crt/config.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "crt/errors.hpp"

namespace crt {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Defaults for every tunable quantity live here.
const std::vector<KeyInfo> kSchema = {
    {"run.seed", "1", "master seed"},

    {"dynamics.m", "1", "perturbation dimension"},
    {"dynamics.n", "1", "parameter dimension"},
    {"dynamics.A_delta", "0 0", "attack gradient matrix, m x d row-major"},
    {"dynamics.b_delta", "1", "attack gradient offset"},
    {"dynamics.A_u", "0.1 1", "learner gradient matrix, n x d row-major"},
    {"dynamics.b_u", "-0.06", "learner gradient offset"},
    {"dynamics.T", "50", "window length"},
    {"dynamics.eps", "0.1", "l_inf ball radius"},
    {"dynamics.eta_delta", "0.06", "attack step size"},
    {"dynamics.eta_u", "0.2", "learner step size"},
    {"dynamics.alpha", "0", "gradient normalization; 0 = 1.1 x probe max"},
    {"dynamics.delta0", "0.0995", "initial perturbation"},
    {"dynamics.u0", "0.06", "initial parameters"},
    {"dynamics.simultaneous", "false", "learner uses the pre-attack perturbation"},

    {"poly.tau_s", "0.2", "sign gap"},
    {"poly.delta_s", "0.05", "sign error"},
    {"poly.L_c", "2", "clip domain half-width"},
    {"poly.tau_c", "0.5", "clip transition half-width"},
    {"poly.delta_c", "0.1", "clip error"},
    {"poly.max_degree", "2001", "largest odd degree tried"},
    {"poly.grid_density", "10000", "verification points per unit length"},
    {"poly.C_s", "4", "constant in the reported degree bounds"},
    {"poly.c_s", "2", "constant in the reported degree bounds"},

    {"lift.center", "auto", "lift reference point (d values) or auto"},
    {"lift.scale", "0.01 1", "lift coordinate scales (d values)"},
    {"lift.N", "0", "cutoff; 0 = designed from the budget"},
    {"lift.N_max", "8", "largest cutoff tried"},
    {"lift.vbar", "0", "trajectory radius; 0 = measured"},
    {"lift.cap", "5000000", "largest lifted dimension"},
    {"lift.expand_radius", "0.5", "round-trip test box for the step expansion"},

    {"budget.eps_out", "0.05", "final output error"},
    {"budget.mode", "polynomial", "polynomial or exact"},
    {"budget.terminal", "true", "plan for the terminal parameter block"},
    {"budget.p_star", "0", "terminal weight bound; 0 = 0.9 x measured"},
    {"budget.ls_share", "0.5", "share of the state budget given to the solver"},
    {"budget.solver_tol", "1e-12", "relative residual target of the classical solve"},

    {"resources.qram", "false", "qRAM preparation model"},
    {"resources.C_prep", "-1", "explicit preparation cost; -1 = N_h"},
    {"resources.C_SA", "1", "gates per sparse-access query"},
    {"resources.a_A", "0", "ancilla overhead"},
    {"resources.c_query", "1", "query constant"},
    {"resources.c_gate", "1", "gate constant"},
    {"resources.c_prep_qram", "1", "qRAM preparation constant"},
    {"resources.polylog_exp", "1", "polylog exponent"},
    {"resources.prep_exp", "1", "qRAM preparation exponent"},
    {"resources.c_ro", "1", "readout cost constant"},

    {"bench.mnist_dir", "", "directory with MNIST IDX files; empty = synthetic"},
    {"bench.steps", "10000", "training steps"},
    {"bench.full_scale", "false", "use 120000 steps"},
    {"bench.batch", "5", "batch size"},
    {"bench.lr", "0.05", "learning rate"},
    {"bench.init_scale", "0.5", "weight init standard deviation"},
    {"bench.log_every", "100", "steps between metric rows"},
    {"bench.eval_samples", "1000", "test samples per evaluation"},
    {"bench.train_samples", "5000", "training samples (synthetic)"},
    {"bench.pgd_eps", "0.025", "PGD radius"},
    {"bench.pgd_step", "0.01", "PGD step size"},
    {"bench.pgd_steps", "10", "PGD steps"},
    {"bench.alphas", "0 0.5 1", "training modes"},
    {"bench.synthetic_noise", "0.05", "pixel noise of the synthetic fallback"},
    {"bench.synthetic_texture", "0.05", "amplitude of the class texture in the synthetic fallback"},
    {"bench.synthetic_swap", "0.3", "probability of a mismatched blob in the synthetic fallback"},
    {"bench.T", "20", "window of the reduction comparison"},
};

const char* kToyAffine = R"(
# contractive affine-gradient toy, saturated attack
[dynamics]
T = 50
)";

const char* kToyNoncontractive = R"(
# learner step expands: rho >= 1
[dynamics]
T = 20
A_u = 0.1 -0.5
eta_u = 0.4
[lift]
N = 2
)";

}  // namespace

const std::vector<KeyInfo>& Config::schema() { return kSchema; }

Config Config::defaults() {
  Config c;
  for (const auto& k : kSchema) c.values_[k.key] = k.def;
  return c;
}

bool Config::is_preset(const std::string& name) {
  return name == "toy_affine" || name == "toy_noncontractive";
}

Config Config::preset(const std::string& name) {
  Config c = defaults();
  if (name == "toy_affine") {
    c.merge_text(kToyAffine, name);
  } else if (name == "toy_noncontractive") {
    c.merge_text(kToyNoncontractive, name);
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  c.origin_ = "preset:" + name;
  return c;
}

Config Config::from_text(const std::string& text, const std::string& origin) {
  Config c = defaults();
  c.merge_text(text, origin);
  c.origin_ = origin;
  return c;
}

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str(), path);
}

Config Config::load(const std::string& spec) {
  if (spec.empty()) return defaults();
  if (is_preset(spec)) return preset(spec);
  return from_file(spec);
}

void Config::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(origin + ":" + std::to_string(lineno) + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    if (section.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": key outside a section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    if (!values_.count(key)) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    values_[key] = trim(line.substr(eq + 1));
  }
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

double Config::num(const std::string& key) const {
  const auto& s = str(key);
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (trim(s.substr(pos)).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "' expects a number, got '" + s + "'");
  }
}

int Config::integer(const std::string& key) const {
  double v = num(key);
  if (v != static_cast<double>(static_cast<long long>(v))) {
    throw ConfigError("key '" + key + "' expects an integer");
  }
  return static_cast<int>(v);
}

bool Config::flag(const std::string& key) const {
  const auto& s = str(key);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("key '" + key + "' expects true/false, got '" + s + "'");
}

std::vector<double> Config::list(const std::string& key) const {
  std::istringstream in(str(key));
  std::vector<double> out;
  std::string tok;
  while (in >> tok) {
    try {
      out.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("key '" + key + "' expects numbers, got '" + tok + "'");
    }
  }
  return out;
}

std::string Config::dump() const {
  std::ostringstream out;
  std::string cur;
  for (const auto& [key, val] : values_) {
    auto dot = key.find('.');
    auto sec = key.substr(0, dot);
    if (sec != cur) {
      out << (cur.empty() ? "" : "\n") << "[" << sec << "]\n";
      cur = sec;
    }
    out << key.substr(dot + 1) << " = " << val << "\n";
  }
  return out.str();
}

std::uint64_t Config::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

}  // namespace crt
