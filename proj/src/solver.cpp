#include "crt/solver.hpp"

#include <Eigen/SparseLU>

#include <cmath>

#include "crt/errors.hpp"

namespace crt {

double relative_residual(const HorizonSystem& sys, const Vec& Y) {
  if (Y.size() != sys.N_h) throw DimensionMismatch("solution length differs from N_h");
  const double nb = sys.rhs.norm();
  const double r = (sys.M * Y - sys.rhs).norm();
  return nb > 0 ? r / nb : r;
}

Vec solve_forward(const HorizonSystem& sys, double* residual) {
  const std::int64_t n = sys.block;
  Vec Y(sys.N_h);
  Y.head(n) = sys.rhs.head(n);
  for (int t = 1; t <= sys.T; ++t) {
    Y.segment(sys.index(t, 0), n) =
        sys.rhs.segment(sys.index(t, 0), n) + sys.B[t - 1] * Y.segment(sys.index(t - 1, 0), n);
  }
  if (residual) *residual = relative_residual(sys, Y);
  return Y;
}

nlohmann::json SolveResult::to_json() const {
  return {{"residual", residual}, {"refinements", refinements}, {"converged", converged},
          {"norm_Y", Y.norm()}};
}

SolveResult solve_linear_system(const HorizonSystem& sys, double eps_ls, int max_refine) {
  using ColMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
  ColMat A = ColMat(sys.M_bar().cast<double>());
  A.makeCompressed();
  Eigen::SparseLU<ColMat> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) throw DegenerateBlock("sparse LU factorization failed: " + lu.lastErrorMessage());
  const Vec b = sys.rhs_bar();
  SolveResult res;
  res.Y = lu.solve(b);
  res.residual = relative_residual(sys, res.Y);
  while (res.residual > eps_ls && res.refinements < max_refine) {
    Vec r = b - A * res.Y;
    res.Y += lu.solve(r);
    ++res.refinements;
    res.residual = relative_residual(sys, res.Y);
  }
  res.converged = res.residual <= eps_ls;
  const double nrm = res.Y.norm();
  res.normalized = nrm > 0 ? Vec(res.Y / nrm) : res.Y;
  return res;
}

nlohmann::json ResourceModel::to_json() const {
  return {{"s_M", s_M},
          {"kappa", kappa},
          {"N_h", N_h},
          {"eps_LS", eps_LS},
          {"qram", qram},
          {"C_prep", C_prep},
          {"C_SA", C_SA},
          {"a_A", a_A},
          {"c_query", c_query},
          {"c_gate", c_gate},
          {"c_prep_qram", c_prep_qram},
          {"polylog_exp", polylog_exp},
          {"prep_exp", prep_exp}};
}

nlohmann::json ResourceEstimate::to_json() const {
  return {{"queries", queries},
          {"gates", gates},
          {"qubits", qubits},
          {"C_prep", C_prep},
          {"success_probability", success_probability},
          {"query_formula", query_formula},
          {"gate_formula", gate_formula},
          {"qubit_formula", qubit_formula},
          {"prep_formula", prep_formula}};
}

namespace {
// ceil(log2(x)) for x >= 1, exact at powers of two.
double ceil_log2(double x) {
  if (x <= 1.0) return 0.0;
  int e = 0;
  double f = std::frexp(x, &e);  // x = f 2^e, f in [0.5, 1)
  return f == 0.5 ? e - 1 : e;
}
}  // namespace

ResourceEstimate qlsa_estimate(const ResourceModel& m) {
  if (m.s_M < 0 || m.kappa < 0 || m.N_h < 0 || m.C_SA < 0 || m.a_A < 0) {
    throw InvalidArgument("resource model fields must be nonnegative");
  }
  if (!(m.eps_LS > 0 && m.eps_LS < 1)) throw InvalidArgument("eps_LS must lie in (0, 1)");
  ResourceEstimate e;
  const double L = std::max(1.0, std::log2(m.N_h / m.eps_LS));
  const double poly = std::pow(L, m.polylog_exp);
  e.queries = m.c_query * m.s_M * m.kappa * poly;
  if (m.qram) {
    e.C_prep = m.c_prep_qram * std::pow(std::max(1.0, std::log2(std::max(m.N_h, 2.0))), m.prep_exp);
    e.prep_formula = "c_prep_qram * log2(N_h)^prep_exp";
  } else {
    e.C_prep = m.C_prep < 0 ? m.N_h : m.C_prep;
    e.prep_formula = m.C_prep < 0 ? "N_h (generic amplitude preparation)" : "explicit C_prep";
  }
  e.gates = e.C_prep + m.c_gate * m.s_M * m.kappa * m.C_SA * poly;
  e.qubits = ceil_log2(m.N_h) + ceil_log2(m.kappa) + ceil_log2(1.0 / m.eps_LS) + m.a_A;
  e.query_formula = "c_query * s_M * kappa * log2(N_h/eps_LS)^polylog_exp";
  e.gate_formula = "C_prep + c_gate * s_M * kappa * C_SA * log2(N_h/eps_LS)^polylog_exp";
  e.qubit_formula = "ceil(log2 N_h) + ceil(log2 kappa) + ceil(log2(1/eps_LS)) + a_A";
  return e;
}

}  // namespace crt
