#include "crt/readout.hpp"

#include <cmath>
#include <limits>

#include "crt/carleman.hpp"
#include "crt/errors.hpp"

namespace crt {

TerminalLayout terminal_layout(int T, std::int64_t block, int m, int n) {
  if (m + n > block) throw DimensionMismatch("level-1 block smaller than d");
  return {static_cast<std::int64_t>(T) * block + m, n};
}

TerminalReadout extract_terminal(const Vec& normalized_Y, const TerminalLayout& layout, double p_star) {
  if (layout.start + layout.n > normalized_Y.size()) throw DimensionMismatch("terminal block out of range");
  TerminalReadout r;
  r.raw = normalized_Y.segment(layout.start, layout.n);
  r.p_term = r.raw.squaredNorm();
  if (r.p_term < 1e-300) throw DegenerateBlock("terminal parameter block has zero weight");
  r.unit = r.raw / std::sqrt(r.p_term);
  r.h5 = r.p_term >= p_star;
  return r;
}

TerminalBound terminal_error_bound(double eps_state, double p_star) {
  if (!(p_star > 0)) throw InvalidArgument("p_* must be positive");
  TerminalBound b;
  b.gate = std::sqrt(p_star) / 2.0;
  b.gated = eps_state <= b.gate;
  b.bound = b.gated ? 2.0 / std::sqrt(p_star) * eps_state : std::numeric_limits<double>::infinity();
  return b;
}

double normalization_bound(const Vec& a, const Vec& b) { return 2.0 * (a - b).norm() / a.norm(); }

double physical_horizon_error(int T, double rho, double gamma_N, double L_lift, double eps_base) {
  if (!(rho < 1.0)) return std::numeric_limits<double>::infinity();
  return std::sqrt(T + 1.0) / (1.0 - rho) * (gamma_N + L_lift * eps_base);
}

bool ErrorBudget::feasible() const {
  for (const auto& q : inequalities) {
    if (!q.holds()) return false;
  }
  return true;
}

nlohmann::json ErrorBudget::to_json() const {
  nlohmann::json ineq = nlohmann::json::array();
  for (const auto& q : inequalities) {
    ineq.push_back({{"name", q.name}, {"lhs", q.lhs}, {"rhs", q.rhs}, {"slack", q.slack()}, {"holds", q.holds()}});
  }
  return {{"mode", mode == BudgetMode::PolynomialModel ? "polynomial-model" : "exact-dynamics"},
          {"eps_out", eps_out},
          {"eps_state", eps_state},
          {"eps_LS", eps_LS},
          {"eps_tr", eps_tr},
          {"eps_ro", eps_ro},
          {"eps_nl_step_allowed", eps_nl_step_allowed},
          {"eps_base_step", eps_base_step},
          {"beta0", beta0},
          {"p_star", p_star},
          {"N", N},
          {"rho", rho},
          {"Gamma_N", gamma_N},
          {"L_lift", L_lift},
          {"stacked_truncation", stacked_tr},
          {"eps_phys_hor", eps_phys_hor},
          {"inequalities", ineq},
          {"feasible", feasible()}};
}

ErrorBudget plan_budgets(const BudgetInputs& in) {
  if (!(in.eps_out > 0)) throw InvalidArgument("eps_out must be positive");
  if (!(in.beta0 > 0)) throw InvalidArgument("beta0 must be positive");
  if (in.steps.empty()) throw InvalidArgument("budget planning needs the step coefficients");
  ErrorBudget b;
  b.mode = in.mode;
  b.eps_out = in.eps_out;
  b.beta0 = in.beta0;
  b.p_star = in.p_star;
  if (in.terminal) {
    b.eps_ro = in.eps_out / 2.0;
    b.eps_state = std::sqrt(in.p_star) * in.eps_out / 4.0;
  } else {
    b.eps_ro = 0.0;
    b.eps_state = in.eps_out;
  }
  b.eps_LS = in.ls_share * b.eps_state;
  b.eps_tr = in.beta0 * (b.eps_state - b.eps_LS) / 2.0;
  const double eps_base = in.mode == BudgetMode::ExactDynamics ? in.eps_base_step : 0.0;
  b.eps_base_step = eps_base;

  bool found = false;
  for (int N = 1; N <= in.N_max && !found; ++N) {
    double rho = 0.0;
    for (const auto& c : in.steps) rho = std::max(rho, majorant(c, N).norm);
    if (!(rho < 1.0)) continue;
    const double g = tail_constant(in.steps, N, in.vbar);
    const double L = lift_lipschitz(N, in.vbar);
    const double stacked = std::sqrt(in.T + 1.0) * g / (1.0 - rho);
    const double phys = physical_horizon_error(in.T, rho, g, L, eps_base);
    const double used = in.mode == BudgetMode::ExactDynamics ? phys : stacked;
    if (used <= b.eps_tr) {
      found = true;
      b.N = N;
      b.rho = rho;
      b.gamma_N = g;
      b.L_lift = L;
      b.stacked_tr = stacked;
      b.eps_phys_hor = phys;
    }
  }
  if (!found) {
    throw InfeasibleBudget("no cutoff N <= " + std::to_string(in.N_max) +
                           " satisfies the truncation share " + std::to_string(b.eps_tr));
  }
  // Room left for the one-step model error after the tail term.
  const double room = b.eps_tr * (1.0 - b.rho) / std::sqrt(in.T + 1.0) - b.gamma_N;
  b.eps_nl_step_allowed = std::max(0.0, room) / b.L_lift;

  const double tr_used = in.mode == BudgetMode::ExactDynamics ? b.eps_phys_hor : b.stacked_tr;
  b.inequalities.push_back({"rho < 1", b.rho, 1.0});
  b.inequalities.push_back({"truncation <= eps_tr", tr_used, b.eps_tr});
  b.inequalities.push_back({"eps_LS + 2 eps_tr / beta0 <= eps_state",
                            b.eps_LS + 2.0 * tr_used / in.beta0, b.eps_state});
  if (in.terminal) {
    b.inequalities.push_back({"eps_state <= sqrt(p_*) / 2", b.eps_state, std::sqrt(in.p_star) / 2.0});
    b.inequalities.push_back({"2/sqrt(p_*) eps_state + eps_ro <= eps_out",
                              2.0 / std::sqrt(in.p_star) * b.eps_state + b.eps_ro, in.eps_out});
    b.inequalities.push_back({"eps_ro <= eps_out / 2", b.eps_ro, in.eps_out / 2.0});
  } else {
    b.inequalities.push_back({"eps_LS <= eps_out / 2", b.eps_LS, in.eps_out / 2.0});
    b.inequalities.push_back({"eps_tr <= beta0 eps_out / 4", b.eps_tr, in.beta0 * in.eps_out / 4.0});
  }
  return b;
}

}  // namespace crt
