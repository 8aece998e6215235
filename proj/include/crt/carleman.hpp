#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "crt/dynamics.hpp"
#include "crt/linalg.hpp"

namespace crt {

inline constexpr std::int64_t kDefaultLiftCap = 5'000'000;

/// Offsets of the levels y_1..y_N inside a stacked lifted vector.
struct LiftLayout {
  int d = 0;
  int N = 0;
  std::vector<std::int64_t> offset;  // offset[j] for j = 1..N; offset[0] unused
  std::int64_t dim = 0;              // Delta_N = sum_j d^j

  std::int64_t level_size(int j) const { return offset[j + 1] - offset[j]; }
};

LiftLayout lift_layout(int d, int N, std::int64_t cap = kDefaultLiftCap);

/// Stacked (v, v(x)v, ..., v^{(x)N}) with row-major tuple indexing.
Vec lift_state(const Vec& v, int N, std::int64_t cap = kDefaultLiftCap);

/// K_{j,s} = sum_{|alpha|=s} Q_{alpha_1} (x) ... (x) Q_{alpha_j}, by enumerating compositions.
SpMat carleman_block(int j, int s, const PolynomialMapCoeffs& c);

/// Number of compositions alpha in {0..D}^j with |alpha| = s.
std::int64_t composition_count(int j, int s, int D);

struct LiftedStep {
  SpMat B;  // Delta_N x Delta_N
  Vec c;    // Delta_N
};

LiftedStep build_lifted_step(const PolynomialMapCoeffs& c, int N, std::int64_t cap = kDefaultLiftCap);

/// y(t+1) = B(t) y(t) + c(t); a single step entry is reused for all t.
std::vector<Vec> run_truncated_recurrence(const std::vector<LiftedStep>& steps, const Vec& y0, int T);

/// R_{j,s} = [x^s] (sum_l ||Q_l|| x^l)^j for 1 <= j <= N, 0 <= s <= j D.
Mat majorant_table(const std::vector<double>& norms, int N);

struct MajorantReport {
  Mat R;                // N x N block, 1 <= j, s <= N
  double norm = 0.0;    // ||R^{(N)}||_2
  double q1_norm = 0.0; // ||Q_1||_2
  double gamma = 0.0;   // 1 - ||Q_1||
  double sigma = 0.0;   // ||R - diag(||Q_1||^j)||_2
  double linear_dominant_bound = 0.0;  // 1 - gamma + sigma
  nlohmann::json to_json() const;
};

std::vector<double> coefficient_norms(const PolynomialMapCoeffs& c);
MajorantReport majorant(const PolynomialMapCoeffs& c, int N);

/// Gamma_N for one step: (sum_j [sum_{s=N+1}^{jD} R_{j,s} vbar^s]^2)^{1/2}.
double tail_constant(const PolynomialMapCoeffs& c, int N, double vbar);
double tail_constant(const std::vector<PolynomialMapCoeffs>& steps, int N, double vbar);

/// S_t(lambda) = sum_l ||Q_l|| (lambda vbar)^l.
double weighted_coefficient_sum(const PolynomialMapCoeffs& c, double lambda, double vbar);
double weighted_tail_bound(double lambda, double chi, int N);
/// Smallest N from the closed-form ceiling rule; throws DesignInfeasible if chi >= 1.
int cutoff_from_weighted(int T, double rho, double eps_tr, double chi, double lambda);

struct CutoffDesign {
  int N = 0;
  double rho = 0.0;
  double gamma_N = 0.0;
  double stacked_bound = 0.0;
};

/// Smallest N <= N_max with sqrt(T+1) Gamma_N / (1 - rho_N) <= eps_tr and rho_N < 1.
CutoffDesign design_cutoff(const std::vector<PolynomialMapCoeffs>& steps, double vbar, int T,
                           double eps_tr, int N_max);

/// (sum_{j<=N} j^2 vbar^{2j-2})^{1/2}.
double lift_lipschitz(int N, double vbar);
double lifted_model_error(int N, double vbar, double eps_base_step);

struct SegmentData {
  int length = 0;  // L_r = T_{r+1} - T_r
  double rho = 0.0;
  double gamma_N = 0.0;
};

struct SegmentResult {
  std::vector<double> per_segment;
  double global = 0.0;
  bool ok = true;
};

SegmentResult segmented_truncation(const std::vector<int>& breakpoints,
                                   const std::vector<SegmentData>& segs);

struct LiftedSystem {
  LiftLayout layout;
  std::vector<LiftedStep> steps;
  std::vector<MajorantReport> majorants;
  double rho = 0.0;
  double gamma_N = 0.0;
  double vbar = 0.0;
  double L_lift = 0.0;
  nlohmann::json to_json() const;
};

LiftedSystem build_lifted_system(const std::vector<PolynomialMapCoeffs>& coeffs, int N, double vbar,
                                 std::int64_t cap = kDefaultLiftCap);

}  // namespace crt
