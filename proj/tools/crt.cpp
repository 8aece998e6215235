// Command-line driver: each subcommand writes its artifacts and a manifest to --output-dir.
#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "crt/bench.hpp"
#include "crt/errors.hpp"
#include "crt/pipeline.hpp"

namespace fs = std::filesystem;
using namespace crt;

namespace {

constexpr const char* kVersion = "1.0.0";

enum Exit { kOk = 0, kError = 1, kUsage = 2, kIo = 3, kInfeasible = 4 };

struct Common {
  std::string out_dir = "out";
  std::string config;
  std::optional<std::int64_t> seed;
  std::vector<std::string> sets;
};

struct Run {
  std::string command;
  Config cfg;
  fs::path dir;
  std::vector<std::string> files;
  nlohmann::json summary;

  fs::path path(const std::string& name) {
    files.push_back(name);
    return dir / name;
  }
  void write_json(const std::string& name, const nlohmann::json& j) {
    std::ofstream out(path(name));
    if (!out) throw IoError("cannot write " + (dir / name).string());
    out << j.dump(2) << "\n";
  }
  void finish() {
    write_json("manifest.json", {{"command", command},
                                 {"version", kVersion},
                                 {"config_origin", cfg.origin()},
                                 {"config_hash", hex64(cfg.hash())},
                                 {"seed", cfg.integer("run.seed")},
                                 {"config", cfg.dump()},
                                 {"files", files},
                                 {"summary", summary}});
  }
};

Run open_run(const std::string& command, const Common& c) {
  Run r;
  r.command = command;
  r.cfg = Config::load(c.config);
  for (const auto& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    r.cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) r.cfg.set("run.seed", std::to_string(*c.seed));
  r.dir = c.out_dir;
  std::error_code ec;
  fs::create_directories(r.dir, ec);
  if (ec) throw IoError("cannot create " + r.dir.string() + ": " + ec.message());
  return r;
}

void export_polys(Run& r, const PipelineArtifacts& a, const PipelineConfig& p) {
  a.Ps.save_text(r.path("P_s.txt"));
  a.Pc.save_text(r.path("P_c.txt"));
  r.write_json("polys.json",
               {{"sign", {{"poly", a.Ps.to_json()},
                          {"certificate", verify_poly_spec(a.Ps, sign_regions(p.sign), p.design.grid_density).to_json()}}},
                {"clip", {{"poly", a.Pc.to_json()},
                          {"certificate", verify_poly_spec(a.Pc, clip_regions(p.clip), p.design.grid_density).to_json()}}}});
}

void export_expansion(Run& r, const PipelineArtifacts& a) {
  r.write_json("step_coeffs.json", a.coeffs.to_json());
  // Dense-tuple column counts d^l grow fast; the JSON terms cover the rest.
  for (int l = 0; l <= a.coeffs.D; ++l) {
    if (a.coeffs.by_degree[l].empty() || std::pow(a.coeffs.d, l) > 1e6) continue;
    write_matrix_market(a.coeffs.Q(l), r.path("Q_" + std::to_string(l) + ".mtx"));
  }
}

void export_lift(Run& r, const PipelineArtifacts& a) {
  r.write_json("lift.json", a.lifted.to_json());
  write_matrix_market(a.lifted.steps[0].B, r.path("B.mtx"), "truncated lifted step matrix");
  write_vector(a.lifted.steps[0].c, r.path("c.txt"));
}

void export_horizon(Run& r, const PipelineArtifacts& a, const Certificate& cert) {
  write_matrix_market(a.horizon.M, r.path("M.mtx"), "horizon system matrix");
  write_vector(a.horizon.rhs, r.path("rhs.txt"));
  r.write_json("horizon.json", {{"horizon", a.horizon.to_json()},
                                {"sparsity", cert.json["sparsity"]},
                                {"conditioning", cert.json["conditioning"]}});
}

void export_solve(Run& r, const PipelineArtifacts& a, const Certificate& cert) {
  write_vector(a.solve.Y, r.path("Y.txt"));
  write_vector(a.solve.normalized, r.path("Y_normalized.txt"));
  r.write_json("solve.json", {{"solve", a.solve.to_json()},
                              {"forward_residual", cert.json["forward_residual"]},
                              {"terminal", cert.json["terminal"]}});
}

int dispatch(const std::string& cmd, const Common& c, const nlohmann::json& extra) {
  Run r = open_run(cmd, c);
  if (cmd == "design-polys") {
    const auto p = PipelineConfig::from(r.cfg);
    PipelineArtifacts a;
    DesignRecord rs;
    a.Ps = design_sign_poly(p.sign, p.design, &rs);
    a.Pc = design_clip_poly(p.clip, p.design);
    export_polys(r, a, p);
    r.summary = {{"K_s", a.Ps.degree()}, {"K_c", a.Pc.degree()}};
    std::cout << "sign degree " << a.Ps.degree() << ", clip degree " << a.Pc.degree() << "\n";
  } else if (cmd == "expand-step" || cmd == "build-lift" || cmd == "assemble" || cmd == "solve" ||
             cmd == "certify") {
    const auto p = PipelineConfig::from(r.cfg);
    PipelineArtifacts a;
    const auto cert = run_pipeline_certificate(p, &a);
    export_polys(r, a, p);
    export_expansion(r, a);
    if (cmd != "expand-step") export_lift(r, a);
    if (cmd == "assemble" || cmd == "solve" || cmd == "certify") export_horizon(r, a, cert);
    if (cmd == "solve" || cmd == "certify") export_solve(r, a, cert);
    if (cmd == "certify") {
      write_trajectory_csv(a.exact, r.path("trajectory_exact.csv").string());
      write_trajectory_csv(a.poly, r.path("trajectory_poly.csv").string());
      r.write_json("certificate.json", cert.json);
      for (const auto& h : cert.hypotheses) {
        std::cout << (h.pass ? "PASS " : "FAIL ") << h.id << ": " << h.statement << "\n";
      }
      std::cout << "certified terminal error " << cert.certified_terminal_error << " (eps_out " << p.eps_out
                << "), measured " << cert.measured_terminal_error << ", |u_T - u_T^PGD| "
                << cert.measured_raw_error << "\n";
    } else {
      std::cout << "N = " << a.lifted.layout.N << ", Delta_N = " << a.lifted.layout.dim << ", D = " << a.coeffs.D
                << ", rho = " << a.lifted.rho << "\n";
    }
    r.summary = {{"N", a.lifted.layout.N}, {"D", a.coeffs.D}, {"rho", a.lifted.rho},
                 {"N_h", a.horizon.N_h}, {"hypotheses_pass", cert.passes({"H1", "H2", "H3", "H4", "H5", "H6"})}};
  } else if (cmd == "estimate-resources") {
    ResourceModel m = resource_model_from(r.cfg);
    m.kappa = extra.at("kappa");
    m.s_M = extra.at("sm");
    m.N_h = extra.at("nh");
    m.eps_LS = extra.at("eps_ls");
    if (extra.at("qram")) m.qram = true;
    if (!(m.kappa >= 1) || !(m.s_M >= 1) || !(m.N_h >= 1) || !(m.eps_LS > 0 && m.eps_LS < 1)) {
      throw InvalidArgument("need kappa >= 1, s_M >= 1, N_h >= 1, 0 < eps_LS < 1");
    }
    const auto e = qlsa_estimate(m);
    r.write_json("resources.json", {{"model", m.to_json()}, {"estimate", e.to_json()}});
    std::cout << "queries " << e.queries << "\ngates " << e.gates << "\nqubits " << e.qubits << "\n";
    r.summary = e.to_json();
  } else if (cmd == "bench-train") {
    const auto tc = TrainConfig::from(r.cfg);
    const auto data = load_bench_data(r.cfg);
    std::vector<TrainResult> runs;
    for (double alpha : r.cfg.list("bench.alphas")) {
      runs.push_back(train_reduced(data, alpha, tc));
      const auto& last = runs.back().rows.back();
      std::cout << runs.back().mode << " (alpha " << alpha << "): clean " << last.clean_acc << ", robust "
                << last.robust_acc << (runs.back().diverged ? " [diverged]" : "") << "\n";
    }
    write_metrics_csv(runs, r.path("metrics.csv").string());
    const auto meta = run_metadata(data, tc, runs);
    r.write_json("run.json", meta);
    r.summary = meta["runs"];
  } else if (cmd == "bench-compare") {
    const auto rep = compare_reduction(comparison_task(r.cfg));
    r.write_json("compare.json", rep.to_json());
    r.write_json("certificate.json", rep.certificate.json);
    std::cout << "poly vs exact " << rep.poly_vs_exact << " <= " << rep.poly_vs_exact_bound << "\n"
              << "carleman vs poly " << rep.carleman_vs_poly << " <= " << rep.carleman_vs_poly_bound << "\n"
              << "carleman vs exact " << rep.carleman_vs_exact << " <= " << rep.carleman_vs_exact_bound << "\n";
    r.summary = rep.to_json();
  }
  r.finish();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Carleman reduction of PGD robust training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);
  Common common;
  nlohmann::json extra = {{"kappa", 0.0}, {"sm", 0.0}, {"nh", 0.0}, {"eps_ls", 0.0}, {"qram", false}};
  double kappa = 0, sm = 0, nh = 0, eps_ls = 0;
  bool qram = false;

  const std::vector<std::pair<std::string, std::string>> cmds = {
      {"design-polys", "design and verify the sign and clip polynomials"},
      {"expand-step", "expand the folded step map into Q_l coefficients"},
      {"build-lift", "build the truncated lifted step"},
      {"assemble", "assemble the horizon system"},
      {"solve", "solve the horizon system"},
      {"certify", "full pipeline with hypothesis checks and the terminal readout"},
      {"estimate-resources", "quantum linear-solver resource estimate"},
      {"bench-train", "reduced adversarial-training bench"},
      {"bench-compare", "exact PGD vs polynomial model vs lifted solve"}};
  for (const auto& [name, doc] : cmds) {
    auto* sub = app.add_subcommand(name, doc);
    sub->add_option("--output-dir,-o", common.out_dir, "artifact directory")->capture_default_str();
    sub->add_option("--config,-c", common.config, "preset name (toy_affine, toy_noncontractive) or config file");
    sub->add_option("--seed", common.seed, "master seed");
    sub->add_option("--set", common.sets, "override a config key, key=value");
    if (name == "estimate-resources") {
      sub->add_option("--kappa", kappa, "condition number")->required();
      sub->add_option("--sm", sm, "row sparsity")->required();
      sub->add_option("--nh", nh, "system dimension")->required();
      sub->add_option("--eps-ls", eps_ls, "solver accuracy")->required();
      sub->add_flag("--qram", qram, "qRAM preparation model");
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }
  extra = {{"kappa", kappa}, {"sm", sm}, {"nh", nh}, {"eps_ls", eps_ls}, {"qram", qram}};
  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    return dispatch(cmd, common, extra);
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const InfeasibleBudget& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const DesignInfeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const BudgetRegimeViolation& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConstructionFailure& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
}
