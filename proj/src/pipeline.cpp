#include "crt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "crt/errors.hpp"

namespace crt {

namespace {

Vec vec_of(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Mat mat_of(const std::vector<double>& v, int rows, int cols, const std::string& key) {
  if (static_cast<int>(v.size()) != rows * cols) {
    throw ConfigError(key + " needs " + std::to_string(rows * cols) + " entries");
  }
  Mat A(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) A(i, j) = v[i * cols + j];
  }
  return A;
}

Vec sized(const std::vector<double>& v, int n, const std::string& key) {
  if (static_cast<int>(v.size()) != n) throw ConfigError(key + " needs " + std::to_string(n) + " entries");
  return vec_of(v);
}

nlohmann::json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

double unit_distance(const Vec& a, const Vec& b) {
  const double na = a.norm(), nb = b.norm();
  if (na == 0 || nb == 0) return std::numeric_limits<double>::infinity();
  return (a / na - b / nb).norm();
}

}  // namespace

ResourceModel resource_model_from(const Config& c) {
  ResourceModel r;
  r.qram = c.flag("resources.qram");
  r.C_prep = c.num("resources.C_prep");
  r.C_SA = c.num("resources.C_SA");
  r.a_A = c.num("resources.a_A");
  r.c_query = c.num("resources.c_query");
  r.c_gate = c.num("resources.c_gate");
  r.c_prep_qram = c.num("resources.c_prep_qram");
  r.polylog_exp = c.num("resources.polylog_exp");
  r.prep_exp = c.num("resources.prep_exp");
  return r;
}

PipelineConfig PipelineConfig::from(const Config& c) {
  PipelineConfig p;
  p.m = c.integer("dynamics.m");
  p.n = c.integer("dynamics.n");
  if (p.m < 1 || p.n < 1) throw ConfigError("dynamics.m and dynamics.n must be >= 1");
  const int d = p.m + p.n;
  p.A_d = mat_of(c.list("dynamics.A_delta"), p.m, d, "dynamics.A_delta");
  p.b_d = sized(c.list("dynamics.b_delta"), p.m, "dynamics.b_delta");
  p.A_u = mat_of(c.list("dynamics.A_u"), p.n, d, "dynamics.A_u");
  p.b_u = sized(c.list("dynamics.b_u"), p.n, "dynamics.b_u");
  p.T = c.integer("dynamics.T");
  p.eps = c.num("dynamics.eps");
  p.eta_delta = c.num("dynamics.eta_delta");
  p.eta_u = c.num("dynamics.eta_u");
  p.alpha = c.num("dynamics.alpha");
  p.delta0 = sized(c.list("dynamics.delta0"), p.m, "dynamics.delta0");
  p.u0 = sized(c.list("dynamics.u0"), p.n, "dynamics.u0");
  p.simultaneous = c.flag("dynamics.simultaneous");

  p.sign = {1.0, c.num("poly.tau_s"), c.num("poly.delta_s")};
  p.clip = {c.num("poly.L_c"), c.num("poly.tau_c"), c.num("poly.delta_c")};
  p.design.max_degree = c.integer("poly.max_degree");
  p.design.grid_density = c.num("poly.grid_density");
  p.C_s = c.num("poly.C_s");
  p.c_s = c.num("poly.c_s");

  p.auto_center = c.str("lift.center") == "auto";
  if (!p.auto_center) p.center = sized(c.list("lift.center"), d, "lift.center");
  p.scale = sized(c.list("lift.scale"), d, "lift.scale");
  p.N = c.integer("lift.N");
  p.N_max = c.integer("lift.N_max");
  p.vbar = c.num("lift.vbar");
  p.cap = static_cast<std::int64_t>(c.num("lift.cap"));
  p.expand_radius = c.num("lift.expand_radius");

  p.eps_out = c.num("budget.eps_out");
  const auto& mode = c.str("budget.mode");
  if (mode == "polynomial") {
    p.mode = BudgetMode::PolynomialModel;
  } else if (mode == "exact") {
    p.mode = BudgetMode::ExactDynamics;
  } else {
    throw ConfigError("budget.mode must be polynomial or exact");
  }
  p.terminal = c.flag("budget.terminal");
  p.p_star = c.num("budget.p_star");
  p.ls_share = c.num("budget.ls_share");
  p.solver_tol = c.num("budget.solver_tol");
  p.resources = resource_model_from(c);
  p.c_ro = c.num("resources.c_ro");
  p.seed = static_cast<std::uint64_t>(c.integer("run.seed"));
  return p;
}

const Hypothesis* Certificate::find(const std::string& id) const {
  for (const auto& h : hypotheses) {
    if (h.id == id) return &h;
  }
  return nullptr;
}

bool Certificate::passes(const std::vector<std::string>& ids) const {
  for (const auto& id : ids) {
    const auto* h = find(id);
    if (!h || !h->pass) return false;
  }
  return true;
}

std::vector<Vec> lift_coordinates(const std::vector<CoupledState>& traj, const Vec& center, const Vec& scale) {
  std::vector<Vec> z;
  for (const auto& s : traj) z.push_back((s.stacked() - center).cwiseQuotient(scale));
  return z;
}

Vec stacked_lift(const std::vector<Vec>& z, int N, std::int64_t cap) {
  const auto L = lift_layout(static_cast<int>(z[0].size()), N, cap);
  Vec Y(static_cast<Eigen::Index>(z.size()) * L.dim);
  for (std::size_t t = 0; t < z.size(); ++t) Y.segment(static_cast<Eigen::Index>(t) * L.dim, L.dim) = lift_state(z[t], N, cap);
  return Y;
}

Certificate run_pipeline_certificate(const PipelineConfig& cfg, PipelineArtifacts* out) {
  PipelineArtifacts art;
  Certificate cert;
  const int m = cfg.m, n = cfg.n, d = m + n, T = cfg.T;
  nlohmann::json J;
  nlohmann::json provenance;

  // Polynomial surrogates.
  art.Ps = design_sign_poly(cfg.sign, cfg.design);
  art.Pc = design_clip_poly(cfg.clip, cfg.design);
  J["polynomials"] = {
      {"sign", {{"spec", {{"L", cfg.sign.L}, {"tau", cfg.sign.tau}, {"delta", cfg.sign.delta}}},
                {"poly", art.Ps.to_json()},
                {"certificate", verify_poly_spec(art.Ps, sign_regions(cfg.sign), cfg.design.grid_density).to_json()}}},
      {"clip", {{"spec", {{"L_c", cfg.clip.L_c}, {"tau_c", cfg.clip.tau_c}, {"delta_c", cfg.clip.delta_c}}},
                {"poly", art.Pc.to_json()},
                {"certificate", verify_poly_spec(art.Pc, clip_regions(cfg.clip), cfg.design.grid_density).to_json()}}}};

  // Dynamics.
  art.grads = GradientModel::affine_model(cfg.A_d, cfg.b_d, cfg.A_u, cfg.b_u);
  double alpha = cfg.alpha;
  CoupledState v0{cfg.delta0, cfg.u0};
  if (!(alpha > 0)) {
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    std::vector<Vec> probes{v0.stacked()};
    for (int k = 0; k < 32; ++k) {
      Vec v(d);
      for (int i = 0; i < m; ++i) v(i) = cfg.eps * U(rng);
      for (int i = 0; i < n; ++i) v(m + i) = cfg.u0(i) + U(rng) * std::max(1.0, std::abs(cfg.u0(i)));
      probes.push_back(v);
    }
    alpha = default_alpha(art.grads, 0, probes);
    provenance["alpha"] = "1.1 x max probe |G_delta|_inf";
  } else {
    provenance["alpha"] = "configured";
  }
  art.sched = StepSchedule::constant(T, cfg.eps, cfg.eta_delta, cfg.eta_u, alpha);
  art.sched.simultaneous = cfg.simultaneous;
  art.sched.validate();
  DomainMonitor mon;
  mon.tau_s = cfg.sign.tau;
  mon.clip_safe_gap = cfg.clip.tau_c;
  art.exact = run_exact(v0, art.sched, art.grads);
  art.poly = run_folded(v0, art.sched, art.grads, art.Ps, art.Pc, &mon);
  // Polynomial step evaluated at the exact states: where the one-step model bound must hold.
  DomainMonitor mon_ex;
  mon_ex.tau_s = cfg.sign.tau;
  mon_ex.clip_safe_gap = cfg.clip.tau_c;
  for (int t = 0; t < T; ++t) folded_poly_step(art.exact[t], t, art.sched, art.grads, art.Ps, art.Pc, &mon_ex);
  J["dynamics"] = {{"m", m}, {"n", n}, {"T", T}, {"eps", cfg.eps}, {"eta_delta", cfg.eta_delta},
                   {"eta_u", cfg.eta_u}, {"alpha", alpha}, {"q", art.grads.q()},
                   {"monitor", mon.to_json()}, {"monitor_exact_states", mon_ex.to_json()}};

  // Lift coordinates.
  art.scale = cfg.scale;
  if (cfg.auto_center) {
    // Attack fixed point at u0, parameters uncentered.
    std::vector<double> v(v0.stacked().data(), v0.stacked().data() + d);
    for (int k = 0; k < 2000; ++k) v = attack_substep(v, 0, art.sched, art.grads, art.Ps, art.Pc);
    art.center = Vec::Zero(d);
    for (int i = 0; i < m; ++i) art.center(i) = v[i];
    provenance["center"] = "attack-substep fixed point for delta, zero for u";
  } else {
    art.center = cfg.center;
    provenance["center"] = "configured";
  }
  StepMap lift_map = recentered(folded_step_map(0, art.sched, art.grads, art.Ps, art.Pc), art.center, art.scale);
  const int q = art.grads.q();
  const int D_bound = q * q * art.Ps.degree() * art.Pc.degree();
  ExpandOptions eo;
  eo.radius = cfg.expand_radius;
  eo.seed = cfg.seed;
  art.coeffs = expand_polynomial_map(lift_map, D_bound, eo);
  std::vector<PolynomialMapCoeffs> steps{art.coeffs};

  const auto z_poly = lift_coordinates(art.poly, art.center, art.scale);
  const auto z_exact = lift_coordinates(art.exact, art.center, art.scale);
  // Radius over both trajectories so the exact-mode comparison stays inside the ball.
  double vbar_meas = 0.0;
  for (const auto& z : z_poly) vbar_meas = std::max(vbar_meas, z.norm());
  for (const auto& z : z_exact) vbar_meas = std::max(vbar_meas, z.norm());
  const double vbar = cfg.vbar > 0 ? cfg.vbar : vbar_meas;
  J["lift"] = {{"center", to_json(art.center)},
               {"scale", to_json(art.scale)},
               {"D", art.coeffs.D},
               {"D_bound", D_bound},
               {"expansion_roundtrip", art.coeffs.roundtrip_residual},
               {"vbar_used", vbar},
               {"vbar_measured", vbar_meas},
               {"vbar_mode", cfg.vbar > 0 ? "asserted" : "measured"},
               {"vbar_disagreement", cfg.vbar > 0 && cfg.vbar < vbar_meas}};

  // Budget, cutoff and solve; p_* and N are refined together.
  const double beta0_plan = z_poly[0].norm();
  double p_star = cfg.p_star > 0 ? cfg.p_star : 1.0 / (2.0 * (T + 1));
  BudgetInputs bi;
  bi.eps_out = cfg.eps_out;
  bi.mode = cfg.mode;
  bi.terminal = cfg.terminal;
  bi.beta0 = beta0_plan;
  bi.T = T;
  bi.vbar = vbar;
  bi.ls_share = cfg.ls_share;
  bi.N_max = cfg.N > 0 ? cfg.N : cfg.N_max;
  bi.steps = steps;
  // Exact-mode model error, expressed in lift coordinates.
  const double eps_nl = one_step_perturbation_bound(m, cfg.eta_delta, cfg.sign.delta, cfg.eps, cfg.clip.delta_c);
  const double eps_base = base_step_error_bound(eps_nl, cfg.eta_u, art.grads.lipschitz_u_delta(0), art.grads.eps_u_grad);
  const double eps_base_z = eps_base / art.scale.minCoeff();
  bi.eps_base_step = eps_base_z;

  int N = cfg.N > 0 ? cfg.N : 1;
  bool planned = false;
  std::string plan_error;
  double p_term = 0.0;
  TerminalReadout ro;
  for (int iter = 0; iter < 6; ++iter) {
    bi.p_star = p_star;
    try {
      cert.budget = plan_budgets(bi);
      planned = true;
      plan_error.clear();
      N = cert.budget.N;
    } catch (const InfeasibleBudget& e) {
      planned = false;
      plan_error = e.what();
    }
    art.lifted = build_lifted_system(steps, N, vbar, cfg.cap);
    const Vec y0 = lift_state(z_poly[0], N, cfg.cap);
    art.horizon = assemble_horizon(art.lifted.steps, y0, T, art.lifted.rho);
    art.solve = solve_linear_system(art.horizon, cfg.solver_tol);
    ro = extract_terminal(art.solve.normalized, terminal_layout(T, art.horizon.block, m, n));
    p_term = ro.p_term;
    if (cfg.p_star > 0) break;
    const double next = 0.9 * p_term;
    if (planned && std::abs(next - p_star) <= 1e-12 * next) break;
    p_star = next;
  }
  provenance["p_star"] = cfg.p_star > 0 ? "asserted" : "0.9 x measured p_term";
  ro.h5 = p_term >= p_star;
  cert.budget_feasible = planned && cert.budget.feasible();
  double fwd_res = 0.0;
  art.forward = solve_forward(art.horizon, &fwd_res);

  // Measurements against the lifted polynomial-model trajectory.
  const Vec Y_ex = stacked_lift(z_poly, N, cfg.cap);
  const double beta0 = lift_state(z_poly[0], N, cfg.cap).norm();
  cert.measured_state_error = unit_distance(art.solve.Y, Y_ex);
  double eta_max = 0.0, eta_sq = 0.0;
  const std::int64_t blk = art.horizon.block;
  for (int t = 0; t <= T; ++t) {
    double e = (art.forward.segment(t * blk, blk) - Y_ex.segment(t * blk, blk)).norm();
    eta_max = std::max(eta_max, e);
    eta_sq += e * e;
  }
  const double rho = art.lifted.rho;
  const double gamma = art.lifted.gamma_N;
  const double tr_pointwise = rho < 1 ? gamma / (1 - rho) : std::numeric_limits<double>::infinity();
  const double tr_stacked = std::sqrt(T + 1.0) * tr_pointwise;
  const double L_lift = lift_lipschitz(N, vbar);
  const double phys = physical_horizon_error(T, rho, gamma, L_lift, eps_base_z);
  const double eps_LS = planned ? cert.budget.eps_LS : cfg.solver_tol;
  const double tr_used = cfg.mode == BudgetMode::ExactDynamics ? phys : tr_stacked;
  cert.certified_state_error = eps_LS + 2.0 * tr_used / beta0;
  const auto tb = terminal_error_bound(cert.certified_state_error, p_star);
  const double eps_ro = planned ? cert.budget.eps_ro : cfg.eps_out / 2.0;
  cert.certified_terminal_error = tb.bound + (cfg.terminal ? eps_ro : 0.0);

  // Terminal block against direct PGD and the polynomial model.
  const Vec zu_exact = z_exact.back().tail(n);
  const Vec zu_poly = z_poly.back().tail(n);
  cert.measured_terminal_error = (ro.unit - zu_exact.normalized()).norm();
  cert.measured_terminal_error_model = (ro.unit - zu_poly.normalized()).norm();
  const auto lay = terminal_layout(T, blk, m, n);
  cert.u_T_estimate = art.center.tail(n) + art.scale.tail(n).cwiseProduct(art.solve.Y.segment(lay.start, n));
  cert.u_T_exact = art.exact.back().u;
  cert.measured_raw_error = (cert.u_T_estimate - cert.u_T_exact).norm();

  // Exact-mode view of the same run.
  const double exact_state = eps_LS + 2.0 * phys / beta0;
  const auto tb_exact = terminal_error_bound(exact_state, p_star);
  const double exact_state_measured = unit_distance(art.solve.Y, stacked_lift(z_exact, N, cfg.cap));

  // Resources.
  const auto sp = sparsity_bounds([&] {
    std::vector<std::int64_t> s;
    for (int l = 0; l <= art.coeffs.D; ++l) s.push_back(art.coeffs.row_sparsity(l));
    return s;
  }(), N);
  const auto cond = condition_bounds(rho, T, art.horizon.N_h <= 2000 ? &art.horizon.M : nullptr);
  ResourceModel rm = cfg.resources;
  rm.s_M = static_cast<double>(sp.s_M);
  rm.kappa = cond.bound;
  rm.N_h = static_cast<double>(art.horizon.N_h);
  rm.eps_LS = std::min(0.5, std::max(eps_LS, 1e-300));
  const auto est = qlsa_estimate(rm);
  const double C_ro = cfg.c_ro * n / (eps_ro * eps_ro);

  // Hypotheses.
  cert.hypotheses.push_back({"H1", "rho = sup_t ||R^(N)(t)||_2 < 1", rho < 1.0,
                             {{"rho", rho}, {"majorant", art.lifted.majorants[0].to_json()}}});
  cert.hypotheses.push_back({"H2", "trajectory radius vbar < 1", vbar_meas < 1.0 && vbar < 1.0 && vbar >= vbar_meas,
                             {{"vbar_measured", vbar_meas}, {"vbar_used", vbar}}});
  cert.hypotheses.push_back({"H3", "sparse-access and preparation cost models declared", std::isfinite(est.gates),
                             {{"model", rm.to_json()}, {"estimate", est.to_json()}}});
  cert.hypotheses.push_back({"H4", "beta0 = ||y^(N)(0)||_2 > 0 measured", beta0 > 0, {{"beta0", beta0}}});
  cert.hypotheses.push_back({"H5", "terminal weight p_term >= p_*", ro.h5, {{"p_term", p_term}, {"p_star", p_star}}});
  cert.hypotheses.push_back({"H6", "readout cost model declared", true,
                             {{"C_ro", C_ro}, {"formula", "c_ro * n / eps_ro^2"}, {"eps_ro", eps_ro}}});
  cert.hypotheses.push_back({"budget", "planned split feasible", cert.budget_feasible,
                             planned ? cert.budget.to_json() : nlohmann::json{{"error", plan_error}}});
  cert.hypotheses.push_back({"gate", "eps_state <= sqrt(p_*)/2", tb.gated,
                             {{"eps_state", cert.certified_state_error}, {"gate", tb.gate}}});
  cert.hypotheses.push_back({"domain", "normalized gradients and clip arguments inside the design intervals",
                             mon.clean(), mon.to_json()});
  const bool admissible = mon_ex.clean() && mon_ex.dead_zone_hits == 0 && mon_ex.clip_band_hits == 0;
  cert.hypotheses.push_back({"admissible", "exact states avoid the sign dead zone and the clip transition band",
                             admissible, mon_ex.to_json()});

  nlohmann::json hyps = nlohmann::json::array();
  for (const auto& h : cert.hypotheses) {
    hyps.push_back({{"id", h.id}, {"statement", h.statement}, {"pass", h.pass}, {"evidence", h.evidence}});
  }
  J["hypotheses"] = hyps;
  J["budget"] = planned ? cert.budget.to_json() : nlohmann::json{{"error", plan_error}};
  J["lifted"] = art.lifted.to_json();
  J["horizon"] = art.horizon.to_json();
  J["sparsity"] = sp.to_json();
  J["conditioning"] = cond.to_json();
  J["solve"] = art.solve.to_json();
  J["forward_residual"] = fwd_res;
  J["resources"] = est.to_json();
  J["bounds"] = {{"truncation_pointwise", tr_pointwise},
                 {"truncation_stacked", tr_stacked},
                 {"eps_nl_step", eps_nl},
                 {"eps_base_step", eps_base},
                 {"eps_base_step_lift", eps_base_z},
                 {"L_lift", L_lift},
                 {"eps_phys_hor", phys},
                 {"certified_state_error", cert.certified_state_error},
                 {"certified_terminal_error", cert.certified_terminal_error},
                 {"exact_mode_state_bound", exact_state},
                 {"exact_mode_terminal_bound", tb_exact.gated ? nlohmann::json(tb_exact.bound + eps_ro) : nlohmann::json("not gated")}};
  J["measured"] = {{"truncation_pointwise_max", eta_max},
                   {"truncation_stacked", std::sqrt(eta_sq)},
                   {"state_error_vs_model", cert.measured_state_error},
                   {"state_error_vs_exact", exact_state_measured},
                   {"terminal_unit_error_vs_exact", cert.measured_terminal_error},
                   {"terminal_unit_error_vs_model", cert.measured_terminal_error_model},
                   {"u_T_estimate", to_json(cert.u_T_estimate)},
                   {"u_T_exact", to_json(cert.u_T_exact)},
                   {"u_T_model", to_json(art.poly.back().u)},
                   {"raw_terminal_error", cert.measured_raw_error}};
  J["terminal"] = {{"p_term", p_term},
                   {"unit", to_json(ro.unit)},
                   {"parameters", to_json(cert.u_T_estimate)},
                   {"certified_error", cert.certified_terminal_error},
                   {"eps_out", cfg.eps_out}};
  J["provenance"] = provenance;
  J["success_probability_note"] = "constant success probability per the solver cost model; classical stand-in is deterministic";
  cert.json = J;
  if (out) *out = std::move(art);
  return cert;
}

}  // namespace crt
