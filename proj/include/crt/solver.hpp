#pragma once

#include <string>

#include <json.hpp>

#include "crt/horizon.hpp"

namespace crt {

/// Relative residual ||M Y - B_rhs|| / ||B_rhs|| of the unscaled system.
double relative_residual(const HorizonSystem& sys, const Vec& Y);

/// Block forward substitution Y_0 = B_rhs_0, Y_t = B_rhs_t + B(t-1) Y_{t-1}.
Vec solve_forward(const HorizonSystem& sys, double* residual = nullptr);

struct SolveResult {
  Vec Y;
  Vec normalized;
  double residual = 0.0;
  int refinements = 0;
  bool converged = false;
  nlohmann::json to_json() const;
};

/// Sparse LU on M_bar Y = B_rhs / (1 + rho) with iterative refinement to eps_ls.
SolveResult solve_linear_system(const HorizonSystem& sys, double eps_ls = 1e-12, int max_refine = 5);

struct ResourceModel {
  double s_M = 1;
  double kappa = 1;
  double N_h = 1;
  double eps_LS = 1e-3;
  bool qram = false;
  double C_prep = -1;       // explicit preparation count; < 0 means N_h
  double C_SA = 1;          // gates per sparse-access query
  double a_A = 0;           // ancilla overhead
  double c_query = 1;       // constant in front of the query bound
  double c_gate = 1;        // constant in front of the query part of the gate bound
  double c_prep_qram = 1;   // constant of the qRAM preparation model
  double polylog_exp = 1;   // exponent p in log2(N_h / eps_LS)^p
  double prep_exp = 1;      // exponent of log2(N_h) in the qRAM preparation model
  nlohmann::json to_json() const;
};

struct ResourceEstimate {
  double queries = 0;
  double gates = 0;
  double qubits = 0;
  double C_prep = 0;
  double success_probability = 2.0 / 3.0;
  std::string query_formula;
  std::string gate_formula;
  std::string qubit_formula;
  std::string prep_formula;
  nlohmann::json to_json() const;
};

ResourceEstimate qlsa_estimate(const ResourceModel& m);

}  // namespace crt
