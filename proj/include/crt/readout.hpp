#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "crt/dynamics.hpp"
#include "crt/linalg.hpp"

namespace crt {

/// Global index range of the terminal level-1 parameter block.
struct TerminalLayout {
  std::int64_t start = 0;
  int n = 0;
};

TerminalLayout terminal_layout(int T, std::int64_t block, int m, int n);

struct TerminalReadout {
  double p_term = 0.0;
  Vec unit;  // projected block renormalized
  Vec raw;   // projected block of the input vector
  bool h5 = false;
};

/// Throws DegenerateBlock when p_term < 1e-300.
TerminalReadout extract_terminal(const Vec& normalized_Y, const TerminalLayout& layout,
                                 double p_star = 0.0);

struct TerminalBound {
  bool gated = false;   // eps_state <= sqrt(p_*) / 2
  double gate = 0.0;
  double bound = 0.0;   // (2 / sqrt(p_*)) eps_state, infinite when not gated
};

TerminalBound terminal_error_bound(double eps_state, double p_star);

/// 2 ||a - b|| / ||a||, the bound on ||a/|a| - b/|b|||.
double normalization_bound(const Vec& a, const Vec& b);

struct Inequality {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack() const { return rhs - lhs; }
  bool holds() const { return lhs <= rhs; }
};

enum class BudgetMode { PolynomialModel, ExactDynamics };

struct BudgetInputs {
  double eps_out = 0.05;
  BudgetMode mode = BudgetMode::PolynomialModel;
  bool terminal = true;       // plan for the terminal block (else for the whole state)
  double beta0 = 1.0;
  double p_star = 1.0;
  int T = 0;
  double vbar = 0.5;
  double eps_base_step = 0.0;  // exact mode only, in lift coordinates
  double ls_share = 0.5;       // fraction of the state budget given to the solver
  int N_max = 8;
  std::vector<PolynomialMapCoeffs> steps;
};

struct ErrorBudget {
  BudgetMode mode = BudgetMode::PolynomialModel;
  double eps_out = 0.0;
  double eps_state = 0.0;  // budget for eps_LS + 2 eps_tr / beta0
  double eps_LS = 0.0;
  double eps_tr = 0.0;     // truncation budget
  double eps_ro = 0.0;
  double eps_nl_step_allowed = 0.0;  // exact mode: what the polynomial layer may use
  double eps_base_step = 0.0;
  double beta0 = 0.0;
  double p_star = 0.0;
  int N = 0;
  double rho = 0.0;
  double gamma_N = 0.0;
  double L_lift = 0.0;
  double stacked_tr = 0.0;   // sqrt(T+1) Gamma_N / (1 - rho)
  double eps_phys_hor = 0.0; // sqrt(T+1)/(1-rho) (Gamma_N + L_lift eps_base)
  std::vector<Inequality> inequalities;
  bool feasible() const;
  nlohmann::json to_json() const;
};

/// Splits eps_out over the solver, truncation, model and readout layers; picks N.
ErrorBudget plan_budgets(const BudgetInputs& in);

/// sqrt(T+1)/(1-rho) (Gamma_N + L_lift eps_base).
double physical_horizon_error(int T, double rho, double gamma_N, double L_lift, double eps_base);

}  // namespace crt
