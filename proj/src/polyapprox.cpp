#include "crt/polyapprox.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>

#include "crt/errors.hpp"

namespace crt {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Compensated Horner (Graillat/Langlois/Louvet) for sum c_k z^k.
double comp_horner(const std::vector<double>& c, double z) {
  if (c.empty()) return 0.0;
  double s = c.back(), err = 0.0;
  for (std::size_t i = c.size() - 1; i-- > 0;) {
    double p = s * z;
    double pi = std::fma(s, z, -p);
    double t = p + c[i];
    double bb = t - p;
    double sigma = (p - (t - bb)) + (c[i] - bb);
    s = t;
    err = err * z + (pi + sigma);
  }
  return s + err;
}

// Clenshaw for sum_k a_k T_{2k+1}(y).
double clenshaw_odd(const std::vector<double>& a, double y) {
  const int n = 2 * static_cast<int>(a.size()) - 1;
  double b1 = 0.0, b2 = 0.0;
  for (int j = n; j >= 1; --j) {
    double cj = (j % 2 == 1) ? a[(j - 1) / 2] : 0.0;
    double b0 = 2.0 * y * b1 - b2 + cj;
    b2 = b1;
    b1 = b0;
  }
  // j = 0 coefficient is zero: P = y b1 - b2.
  return y * b1 - b2;
}

// Derivative coefficients: T'_n = n U_{n-1}; evaluate sum a_k (2k+1) U_{2k}(y).
double clenshaw_odd_deriv(const std::vector<double>& a, double y) {
  const int n = 2 * static_cast<int>(a.size()) - 1;
  double b1 = 0.0, b2 = 0.0;
  for (int j = n - 1; j >= 0; --j) {
    double cj = (j % 2 == 0) ? a[j / 2] * (j + 1) : 0.0;
    double b0 = 2.0 * y * b1 - b2 + cj;
    b2 = b1;
    b1 = b0;
  }
  // sum c_j U_j = b0 (U recurrence with U_0 = 1, U_1 = 2y).
  return b1;
}

double erfc_inv(double target) {
  double lo = 0.0, hi = 30.0;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (std::erfc(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

// Chebyshev coefficients a_0..a_{nmax} of f on [-1, 1] from n_nodes first-kind nodes.
std::vector<double> cheb_coeffs(const std::function<double(double)>& f, int nmax, int n_nodes) {
  std::vector<double> a(nmax + 1, 0.0);
  for (int i = 0; i < n_nodes; ++i) {
    double th = std::numbers::pi * (i + 0.5) / n_nodes;
    double fy = f(std::cos(th));
    for (int j = 0; j <= nmax; ++j) a[j] += fy * std::cos(j * th);
  }
  for (int j = 0; j <= nmax; ++j) a[j] *= 2.0 / n_nodes;
  a[0] *= 0.5;
  return a;
}

}  // namespace

double exact_sign(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }
double exact_sat(double x) { return std::clamp(x, -1.0, 1.0); }
double shifted_sign_sat(double x) {
  return 0.5 * ((x + 1.0) * exact_sign(x + 1.0) - (x - 1.0) * exact_sign(x - 1.0));
}

double OddPolynomial::operator()(double x) const {
  if (x == 0.0 || coeffs.empty()) return 0.0;
  double ax = std::abs(x);
  double y = ax / scale;
  double v = 0.0;
  if (basis == Basis::Chebyshev) {
    v = clenshaw_odd(coeffs, y);
  } else {
    v = y * comp_horner(coeffs, y * y);
  }
  return x < 0 ? -v : v;
}

double OddPolynomial::derivative(double x) const {
  if (coeffs.empty()) return 0.0;
  double y = std::abs(x) / scale;
  double v = 0.0;
  if (basis == Basis::Chebyshev) {
    v = clenshaw_odd_deriv(coeffs, y);
  } else {
    std::vector<double> dc(coeffs.size());
    for (std::size_t k = 0; k < coeffs.size(); ++k) dc[k] = coeffs[k] * (2.0 * k + 1.0);
    v = comp_horner(dc, y * y);
  }
  return v / scale;
}

std::vector<double> OddPolynomial::monomial_coeffs() const {
  const int n = degree();
  std::vector<long double> mono(n + 1, 0.0L);
  if (basis == Basis::Chebyshev) {
    // T_j monomial expansions by recurrence.
    std::vector<long double> tm2(n + 1, 0.0L), tm1(n + 1, 0.0L), tj(n + 1, 0.0L);
    tm2[0] = 1.0L;
    if (n >= 1) tm1[1] = 1.0L;
    for (int j = 1; j <= n; ++j) {
      if (j >= 2) {
        std::fill(tj.begin(), tj.end(), 0.0L);
        for (int i = 0; i < n; ++i) tj[i + 1] += 2.0L * tm1[i];
        for (int i = 0; i <= n; ++i) tj[i] -= tm2[i];
        tm2 = tm1;
        tm1 = tj;
      }
      if (j % 2 == 1) {
        long double a = coeffs[(j - 1) / 2];
        for (int i = 0; i <= n; ++i) mono[i] += a * tm1[i];
      }
    }
  } else {
    for (std::size_t k = 0; k < coeffs.size(); ++k) mono[2 * k + 1] = coeffs[k];
  }
  std::vector<double> out(coeffs.size());
  long double s = 1.0L / scale;
  long double sp = s;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    out[k] = static_cast<double>(mono[2 * k + 1] * sp);
    sp *= s * s;
  }
  return out;
}

double OddPolynomial::coeff_l1() const {
  double s = 0.0;
  for (double c : coeffs) s += std::abs(c);
  return s;
}

void OddPolynomial::save_text(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "# basis " << (basis == Basis::Chebyshev ? "chebyshev" : "monomial") << "\n";
  out << std::setprecision(17) << "# scale " << scale << "\n";
  for (double c : coeffs) out << c << "\n";
}

OddPolynomial OddPolynomial::load_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  OddPolynomial p;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ss(line.substr(1));
      std::string key, val;
      ss >> key >> val;
      if (key == "basis") p.basis = (val == "chebyshev") ? Basis::Chebyshev : Basis::Monomial;
      if (key == "scale") p.scale = std::stod(val);
      continue;
    }
    p.coeffs.push_back(std::stod(line));
  }
  return p;
}

nlohmann::json OddPolynomial::to_json() const {
  return {{"basis", basis == Basis::Chebyshev ? "chebyshev" : "monomial"},
          {"scale", scale},
          {"degree", degree()},
          {"odd_coefficients", coeffs}};
}

nlohmann::json CertificateFragment::to_json() const {
  nlohmann::json regs = nlohmann::json::array();
  for (const auto& r : regions) {
    regs.push_back({{"name", r.name},
                    {"bound", r.bound},
                    {"grid_max", r.grid_max},
                    {"at", r.at},
                    {"violation", r.violation},
                    {"inflation", r.inflation},
                    {"certified_sup", r.certified_sup},
                    {"float_slack", r.float_slack},
                    {"pass", r.pass}});
  }
  return {{"degree", degree}, {"grid_step", grid_step}, {"deriv_sup", deriv_sup},
          {"regions", regs},  {"pass", pass}};
}

CertificateFragment verify_poly_spec(const OddPolynomial& p, const std::vector<RegionCheck>& regions,
                                     double grid_density) {
  CertificateFragment cert;
  cert.degree = p.degree();
  const int n = std::max(cert.degree, 1);
  double W = p.scale;
  for (const auto& r : regions) {
    for (const auto& iv : r.intervals) W = std::max({W, std::abs(iv.lo), std::abs(iv.hi)});
  }
  // Step small enough for the Markov factor on P'' to stay below 1/2.
  double h = 1.0 / std::max(grid_density, 1e4);
  const double markov = static_cast<double>(n - 1) * (n - 1) / W;
  if (markov > 0) h = std::min(h, 1.0 / markov);
  cert.grid_step = h;

  // P' is even: a grid on [0, W] covers [-W, W].
  double g_d = 0.0, g_d1 = 0.0;
  const auto kd = static_cast<std::int64_t>(std::ceil(W / h));
  for (std::int64_t i = 0; i <= kd; ++i) {
    double x = std::min(W, i * h);
    double d = p.derivative(x);
    g_d = std::max(g_d, std::abs(d));
    g_d1 = std::max(g_d1, std::abs(d - 1.0));
  }
  const double fac = 1.0 - 0.5 * h * markov;
  const double sup_d = g_d / fac;
  const double sup_dd = markov * sup_d;  // Markov bound on |P''|
  cert.deriv_sup = sup_d;
  const double sup_d1 = g_d1 + 0.5 * h * sup_dd;
  const double slack =
      4.0 * kEps * (n + 2) * (1.0 + (p.basis == Basis::Chebyshev ? p.coeff_l1() : std::abs(p(W))));

  cert.pass = true;
  for (const auto& r : regions) {
    RegionReport rep;
    rep.name = r.name;
    rep.bound = r.bound;
    rep.float_slack = slack;
    const double lip = (r.kind == CheckKind::IdentityError) ? sup_d1 : sup_d;
    double tent = 0.0;
    double gmax = -1.0;
    for (const auto& iv : r.intervals) {
      const double len = iv.hi - iv.lo;
      const auto k = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(len / h)));
      const double hs = len / static_cast<double>(k);
      auto err = [&](double x) {
        double px = p(x);
        switch (r.kind) {
          case CheckKind::AbsBound: return std::abs(px);
          case CheckKind::SignError: return std::abs(px - exact_sign(x));
          case CheckKind::IdentityError: return std::abs(px - x);
        }
        return 0.0;
      };
      double prev = err(iv.lo);
      if (prev > gmax) {
        gmax = prev;
        rep.at = iv.lo;
      }
      for (std::int64_t i = 1; i <= k; ++i) {
        double x = (i == k) ? iv.hi : iv.lo + static_cast<double>(i) * hs;
        double e = err(x);
        if (e > gmax) {
          gmax = e;
          rep.at = x;
        }
        tent = std::max(tent, 0.5 * (prev + e) + 0.5 * lip * hs);
        prev = e;
      }
      rep.inflation = std::max(rep.inflation, 0.5 * lip * hs);
    }
    rep.grid_max = gmax;
    rep.violation = std::max(0.0, gmax - r.bound);
    rep.certified_sup = std::max(tent, gmax);
    rep.pass = rep.certified_sup <= r.bound + slack;
    cert.pass = cert.pass && rep.pass;
    cert.regions.push_back(rep);
  }
  return cert;
}

std::vector<RegionCheck> sign_regions(const SignSpec& s) {
  return {{"abs_bound", {{-s.L, s.L}}, CheckKind::AbsBound, 1.0},
          {"sign_error", {{-s.L, -s.tau}, {s.tau, s.L}}, CheckKind::SignError, s.delta}};
}

std::vector<RegionCheck> clip_regions(const ClipSpec& c) {
  const double in = 1.0 - c.tau_c, out = 1.0 + c.tau_c;
  std::vector<RegionCheck> r;
  r.push_back({"inner_identity", {{-in, in}}, CheckKind::IdentityError, c.delta_c});
  if (out <= c.L_c) {
    r.push_back({"outer_sign", {{-c.L_c, -out}, {out, c.L_c}}, CheckKind::SignError, c.delta_c});
  }
  r.push_back({"unit_bound", {{-1.0, 1.0}}, CheckKind::AbsBound, 1.0});
  return r;
}

namespace {

void check_sign_spec(const SignSpec& s) {
  if (!(s.L > 0) || !(s.tau > 0) || !(s.tau < s.L)) {
    throw InvalidArgument("sign spec needs 0 < tau < L");
  }
  if (!(s.delta > 0) || !(s.delta < 0.5)) throw InvalidArgument("sign spec needs delta in (0, 1/2)");
}

OddPolynomial design_sign_base(double tau, double delta, const DesignOptions& opt, DesignRecord* rec) {
  const double k = erfc_inv(delta / 4.0) / tau;
  const double amp = 1.0 - delta / 4.0;
  auto f = [&](double y) { return amp * std::erf(k * y); };
  const int nmax = opt.max_degree + 2;
  const int nodes = std::max(2 * nmax + 64, 1024);
  auto a = cheb_coeffs(f, nmax, nodes);
  // Suffix max of |a_j| over j > n, the pre-screen quantity.
  std::vector<double> tail_max(nmax + 2, 0.0);
  for (int j = nmax; j >= 0; --j) tail_max[j] = std::max(tail_max[j + 1], std::abs(a[j]));

  const SignSpec unit{1.0, tau, delta};
  const auto regions = sign_regions(unit);
  int tried = 0;
  for (int n = 1; n <= opt.max_degree; n += 2) {
    if (tail_max[n + 1] > 2.0 * delta) continue;
    OddPolynomial p{Basis::Chebyshev, 1.0, {}};
    for (int j = 1; j <= n; j += 2) p.coeffs.push_back(a[j]);
    ++tried;
    // Coarse grid rejection before the certified pass.
    bool coarse_ok = true;
    for (int i = 0; i <= 2000 && coarse_ok; ++i) {
      double x = i / 2000.0;
      double v = p(x);
      if (std::abs(v) > 1.0 || (x >= tau && std::abs(v - 1.0) > delta)) coarse_ok = false;
    }
    if (!coarse_ok) continue;
    auto cert = verify_poly_spec(p, regions, opt.grid_density);
    if (cert.pass) {
      if (rec) *rec = {p.degree(), tried, k};
      return p;
    }
  }
  throw ConstructionFailure("no odd polynomial up to degree " + std::to_string(opt.max_degree) +
                            " passed verification (tau=" + std::to_string(tau) +
                            ", delta=" + std::to_string(delta) + ")");
}

}  // namespace

OddPolynomial design_sign_poly(const SignSpec& spec, const DesignOptions& opt, DesignRecord* rec) {
  check_sign_spec(spec);
  OddPolynomial q = design_sign_base(spec.tau / spec.L, spec.delta, opt, rec);
  // P(x) = Q(x / L): same coefficients, scale multiplied by L.
  q.scale *= spec.L;
  return q;
}

OddPolynomial design_clip_poly(const ClipSpec& spec, const SignBuilder& sign_builder,
                               const DesignOptions& opt) {
  if (!(spec.L_c > 1.0)) throw InvalidArgument("clip spec needs L_c > 1");
  if (!(spec.tau_c > 0) || spec.tau_c > spec.L_c - 1.0) {
    throw InvalidArgument("clip spec needs tau_c in (0, L_c - 1]");
  }
  const double ds = spec.delta_c / spec.L_c;
  if (!(ds > 0) || !(ds < 0.5)) throw InvalidArgument("clip spec needs delta_c / L_c in (0, 1/2)");
  OddPolynomial S = sign_builder(SignSpec{spec.R_c(), spec.tau_c, ds});
  const int n = S.degree();  // P_c is odd of degree <= n
  auto pc = [&](double x) { return 0.5 * ((x + 1.0) * S(x + 1.0) - (x - 1.0) * S(x - 1.0)); };
  // Exact re-expansion in Chebyshev form on [-L_c, L_c] (interpolation at n + 1 nodes).
  const int nodes = n + 1;
  std::vector<double> a(n + 1, 0.0);
  for (int i = 0; i < nodes; ++i) {
    double th = std::numbers::pi * (i + 0.5) / nodes;
    double fy = pc(spec.L_c * std::cos(th));
    for (int j = 1; j <= n; j += 2) a[j] += fy * std::cos(j * th);
  }
  OddPolynomial p{Basis::Chebyshev, spec.L_c, {}};
  for (int j = 1; j <= n; j += 2) p.coeffs.push_back(a[j] * 2.0 / nodes);
  auto cert = verify_poly_spec(p, clip_regions(spec), opt.grid_density);
  if (!cert.pass) {
    throw ConstructionFailure("clip polynomial of degree " + std::to_string(p.degree()) +
                              " failed verification");
  }
  return p;
}

OddPolynomial design_clip_poly(const ClipSpec& spec, const DesignOptions& opt) {
  return design_clip_poly(
      spec, [&](const SignSpec& s) { return design_sign_poly(s, opt); }, opt);
}

nlohmann::json DegreeChoice::to_json() const {
  return {{"delta_s", delta_s},         {"delta_c", delta_c},
          {"K_s_bound", K_s_bound},     {"K_c_bound", K_c_bound},
          {"K_s_formula", K_s_formula}, {"K_c_formula", K_c_formula}};
}

DegreeChoice degrees_from_budget(const DegreeBudget& b) {
  if (!(b.eps_nl_step > 0) || !(b.eta_delta_max > 0) || !(b.eps > 0) || b.m < 1) {
    throw InvalidArgument("degree budget needs positive eps_nl_step, eta_delta_max, eps and m >= 1");
  }
  const double rm = std::sqrt(static_cast<double>(b.m));
  const double lim = std::min(b.eta_delta_max * rm, b.eps * b.L_c * rm);
  if (!(b.eps_nl_step < lim)) {
    throw BudgetRegimeViolation("eps_nl_step = " + std::to_string(b.eps_nl_step) +
                                " is not below min{eta sqrt(m), eps L_c sqrt(m)} = " +
                                std::to_string(lim));
  }
  DegreeChoice c;
  c.delta_s = b.eps_nl_step / (2.0 * b.eta_delta_max * rm);
  c.delta_c = b.eps_nl_step / (2.0 * b.eps * rm);
  c.K_s_bound = b.C_s / b.tau_s * std::log(2.0 * b.c_s * b.eta_delta_max * rm / b.eps_nl_step);
  c.K_c_bound = 1.0 + b.C_s * (b.L_c + 1.0) / b.tau_c *
                          std::log(4.0 * b.c_s * b.L_c * b.eps * rm / b.eps_nl_step);
  c.K_s_formula = "C_s/tau_s * log(2 c_s eta_delta sqrt(m) / eps_nl)";
  c.K_c_formula = "1 + C_s (L_c+1)/tau_c * log(4 c_s L_c eps sqrt(m) / eps_nl)";
  return c;
}

}  // namespace crt
