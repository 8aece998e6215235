#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "crt/carleman.hpp"
#include "crt/config.hpp"
#include "crt/dynamics.hpp"
#include "crt/horizon.hpp"
#include "crt/polyapprox.hpp"
#include "crt/readout.hpp"
#include "crt/solver.hpp"

namespace crt {

struct PipelineConfig {
  int m = 1;
  int n = 1;
  Mat A_d, A_u;
  Vec b_d, b_u;
  int T = 50;
  double eps = 0.1;
  double eta_delta = 0.06;
  double eta_u = 0.2;
  double alpha = 0.0;  // <= 0: default rule
  Vec delta0, u0;
  bool simultaneous = false;

  SignSpec sign{1.0, 0.2, 0.05};
  ClipSpec clip{2.0, 0.5, 0.1};
  DesignOptions design;
  double C_s = 4.0;
  double c_s = 2.0;

  bool auto_center = true;
  Vec center, scale;
  int N = 0;  // 0: designed
  int N_max = 8;
  double vbar = 0.0;  // 0: measured
  std::int64_t cap = kDefaultLiftCap;
  double expand_radius = 0.5;

  double eps_out = 0.05;
  BudgetMode mode = BudgetMode::PolynomialModel;
  bool terminal = true;
  double p_star = 0.0;  // 0: 0.9 x measured p_term
  double ls_share = 0.5;
  double solver_tol = 1e-12;

  ResourceModel resources;
  double c_ro = 1.0;
  std::uint64_t seed = 1;

  static PipelineConfig from(const Config& c);
};

struct Hypothesis {
  std::string id;
  std::string statement;
  bool pass = false;
  nlohmann::json evidence;
};

/// Everything the pipeline computed, for export by the command line.
struct PipelineArtifacts {
  OddPolynomial Ps, Pc;
  GradientModel grads;
  StepSchedule sched;
  std::vector<CoupledState> exact, poly;
  Vec center, scale;
  PolynomialMapCoeffs coeffs;
  LiftedSystem lifted;
  HorizonSystem horizon;
  SolveResult solve;
  Vec forward;
};

struct Certificate {
  std::vector<Hypothesis> hypotheses;
  ErrorBudget budget;
  bool budget_feasible = false;
  double certified_state_error = 0.0;
  double certified_terminal_error = 0.0;
  double measured_state_error = 0.0;
  double measured_terminal_error = 0.0;        // unit terminal block vs direct PGD
  double measured_terminal_error_model = 0.0;  // unit terminal block vs polynomial model
  double measured_raw_error = 0.0;             // recovered u_T vs direct PGD u_T
  Vec u_T_estimate;
  Vec u_T_exact;
  nlohmann::json json;

  const Hypothesis* find(const std::string& id) const;
  bool passes(const std::vector<std::string>& ids) const;
};

Certificate run_pipeline_certificate(const PipelineConfig& cfg, PipelineArtifacts* out = nullptr);

/// Lift coordinates z = (v - center) / scale of a trajectory.
std::vector<Vec> lift_coordinates(const std::vector<CoupledState>& traj, const Vec& center, const Vec& scale);

/// Stacked lifted trajectory (lift(z_0), ..., lift(z_T)).
Vec stacked_lift(const std::vector<Vec>& z, int N, std::int64_t cap = kDefaultLiftCap);

ResourceModel resource_model_from(const Config& c);

}  // namespace crt
