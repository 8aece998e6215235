#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "crt/linalg.hpp"
#include "crt/multipoly.hpp"
#include "crt/polyapprox.hpp"

namespace crt {

/// Joint perturbation/parameter vector v = (delta, u).
struct CoupledState {
  Vec delta;
  Vec u;

  int m() const { return static_cast<int>(delta.size()); }
  int n() const { return static_cast<int>(u.size()); }
  int d() const { return m() + n(); }
  Vec stacked() const;
  static CoupledState split(const Vec& v, int m);
};

/// Gradient surrogates at one time step, each a polynomial in the d coupled coordinates.
struct GradientStep {
  std::vector<MultiPoly> g_delta;  // m components
  std::vector<MultiPoly> g_u;      // n components
};

struct GradientModel {
  bool affine = false;
  int m = 0;
  int n = 0;
  std::vector<GradientStep> steps;  // one entry means time-invariant
  double eps_delta_grad = 0.0;
  double eps_u_grad = 0.0;
  std::vector<double> L_u_delta;  // per t (or one entry)
  // Optional exact gradients; the surrogates are used when unset.
  std::function<Vec(const Vec&, int)> exact_g_delta;
  std::function<Vec(const Vec&, int)> exact_g_u;

  int d() const { return m + n; }
  int q() const;
  const GradientStep& at(int t) const;
  double lipschitz_u_delta(int t) const;

  Vec surrogate_g_delta(const Vec& v, int t) const;
  Vec surrogate_g_u(const Vec& v, int t) const;
  Vec g_delta(const Vec& v, int t) const;
  Vec g_u(const Vec& v, int t) const;

  /// g_delta = A_d v + b_d, g_u = A_u v + b_u (time-invariant); sets L_u_delta = ||A_u[:, :m]||_2.
  static GradientModel affine_model(const Mat& A_d, const Vec& b_d, const Mat& A_u, const Vec& b_u);
};

struct StepSchedule {
  int T = 0;
  double eps = 0.1;
  std::vector<double> eta_delta;  // per t or one entry
  std::vector<double> eta_u;
  std::vector<double> alpha;
  std::vector<int> sample;     // deterministic sample order
  std::vector<int> K_sub;      // attack substeps per t (optional)
  std::vector<int> L_sub;      // learner substeps per t (optional)
  bool simultaneous = false;   // learner uses the pre-attack delta

  double eta_d(int t) const { return pick(eta_delta, t); }
  double eta_p(int t) const { return pick(eta_u, t); }
  double alpha_t(int t) const { return pick(alpha, t); }
  int K(int t) const { return K_sub.empty() ? 1 : K_sub[std::min<std::size_t>(t, K_sub.size() - 1)]; }
  int L(int t) const { return L_sub.empty() ? 1 : L_sub[std::min<std::size_t>(t, L_sub.size() - 1)]; }
  void validate(int K_max = 64, int L_max = 64) const;

  static StepSchedule constant(int T, double eps, double eta_delta, double eta_u, double alpha);

 private:
  static double pick(const std::vector<double>& v, int t);
};

/// Counters for the dead-zone and clip-safe conditions seen by the double path.
struct DomainMonitor {
  double tau_s = 0.0;          // dead-zone half-width in normalized units (0: off)
  double clip_safe_gap = 0.0;  // transition half-width around +-1 (0: off)
  std::int64_t evaluations = 0;
  std::int64_t grad_out_of_range = 0;  // |G/alpha| > 1
  std::int64_t clip_out_of_range = 0;  // |clip argument| > L_c
  std::int64_t dead_zone_hits = 0;     // |G/alpha| < tau_s
  std::int64_t clip_band_hits = 0;     // ||arg| - 1| < gap
  double max_norm_grad = 0.0;
  double max_clip_arg = 0.0;
  bool clean() const { return grad_out_of_range == 0 && clip_out_of_range == 0; }
  nlohmann::json to_json() const;
};

inline double apply_poly(const OddPolynomial& p, double x) { return p(x); }
template <class R>
R apply_poly(const OddPolynomial& p, const R& x) {
  return p.eval(x);
}

/// One polynomial attack substep on delta (u fixed).
template <class R>
std::vector<R> attack_substep(const std::vector<R>& v, int t, const StepSchedule& s,
                              const GradientModel& g, const OddPolynomial& Ps,
                              const OddPolynomial& Pc, DomainMonitor* mon = nullptr) {
  const int m = g.m;
  const auto& gs = g.at(t);
  std::vector<R> out = v;
  const double inv_alpha = 1.0 / s.alpha_t(t);
  const double inv_eps = 1.0 / s.eps;
  for (int i = 0; i < m; ++i) {
    R z = eval_at(gs.g_delta[i], v) * inv_alpha;
    R w = (v[i] + apply_poly(Ps, z) * s.eta_d(t)) * inv_eps;
    if constexpr (std::is_same_v<R, double>) {
      if (mon) {
        ++mon->evaluations;
        mon->max_norm_grad = std::max(mon->max_norm_grad, std::abs(z));
        mon->max_clip_arg = std::max(mon->max_clip_arg, std::abs(w));
        if (std::abs(z) > 1.0) ++mon->grad_out_of_range;
        if (std::abs(w) > Pc.scale) ++mon->clip_out_of_range;
        if (std::abs(z) < mon->tau_s) ++mon->dead_zone_hits;
        if (std::abs(std::abs(w) - 1.0) < mon->clip_safe_gap) ++mon->clip_band_hits;
      }
    }
    out[i] = apply_poly(Pc, w) * s.eps;
  }
  return out;
}

/// One learner substep u <- u - eta_u G_u(delta, u).
template <class R>
std::vector<R> learner_substep(const std::vector<R>& v, int t, const StepSchedule& s,
                               const GradientModel& g) {
  const auto& gs = g.at(t);
  std::vector<R> out = v;
  for (int i = 0; i < g.n; ++i) out[g.m + i] = v[g.m + i] - eval_at(gs.g_u[i], v) * s.eta_p(t);
  return out;
}

/// Folded outer step (K_t attack substeps then L_t learner substeps; 1 and 1 by default).
template <class R>
std::vector<R> folded_step(const std::vector<R>& v, int t, const StepSchedule& s,
                           const GradientModel& g, const OddPolynomial& Ps, const OddPolynomial& Pc,
                           DomainMonitor* mon = nullptr) {
  std::vector<R> a = v;
  for (int k = 0; k < s.K(t); ++k) a = attack_substep(a, t, s, g, Ps, Pc, mon);
  if (s.simultaneous) {
    // Learner sees the pre-attack delta.
    std::vector<R> b = v;
    for (int l = 0; l < s.L(t); ++l) b = learner_substep(b, t, s, g);
    for (int i = 0; i < g.n; ++i) a[g.m + i] = b[g.m + i];
    return a;
  }
  for (int l = 0; l < s.L(t); ++l) a = learner_substep(a, t, s, g);
  return a;
}

CoupledState exact_outer_step(const CoupledState& v, int t, const StepSchedule& s,
                              const GradientModel& g);
CoupledState folded_poly_step(const CoupledState& v, int t, const StepSchedule& s,
                              const GradientModel& g, const OddPolynomial& Ps,
                              const OddPolynomial& Pc, DomainMonitor* mon = nullptr);

std::vector<CoupledState> run_exact(const CoupledState& v0, const StepSchedule& s,
                                    const GradientModel& g);
std::vector<CoupledState> run_folded(const CoupledState& v0, const StepSchedule& s,
                                     const GradientModel& g, const OddPolynomial& Ps,
                                     const OddPolynomial& Pc, DomainMonitor* mon = nullptr);

/// 1.1 * max over probes of ||G_delta(v)||_inf at step t.
double default_alpha(const GradientModel& g, int t, const std::vector<Vec>& probes);

void write_trajectory_csv(const std::vector<CoupledState>& traj, const std::string& path);

/// A step map available in the three rings used by the library.
struct StepMap {
  int d = 0;
  std::function<std::vector<double>(const std::vector<double>&)> f64;
  std::function<std::vector<MultiPoly>(const std::vector<MultiPoly>&)> fpoly;
  std::function<std::vector<ModP>(const std::vector<ModP>&)> fmod;

  Vec operator()(const Vec& v) const;
};

template <class F>
StepMap make_step_map(int d, F f) {
  StepMap s;
  s.d = d;
  s.f64 = [f](const std::vector<double>& v) { return f(v); };
  s.fpoly = [f](const std::vector<MultiPoly>& v) { return f(v); };
  s.fmod = [f](const std::vector<ModP>& v) { return f(v); };
  return s;
}

/// z -> (Psi(ref + scale * z) - ref) / scale, componentwise.
StepMap recentered(const StepMap& f, const Vec& ref, const Vec& scale);

/// Step map of the folded (or composed) outer update at time t.
StepMap folded_step_map(int t, const StepSchedule& s, const GradientModel& g,
                        const OddPolynomial& Ps, const OddPolynomial& Pc);

struct MapTerm {
  std::vector<int> exps;
  Vec coef;  // length d
};

/// Psi(v) = sum_l Q_l v^{(x) l}, stored as monomial terms grouped by degree.
struct PolynomialMapCoeffs {
  int d = 0;
  int D = 0;
  std::vector<std::vector<MapTerm>> by_degree;  // size D + 1
  double roundtrip_residual = 0.0;

  /// d x d^l matrix with symmetric placement over tuple permutations.
  SpMat Q(int l) const;
  /// ||Q_l||_2 computed from the d x d Gram matrix sum c c^T / multinom.
  double norm(int l) const;
  std::int64_t row_sparsity(int l) const;
  Vec eval(const Vec& v) const;
  Vec eval_tensor(const Vec& v) const;
  nlohmann::json to_json() const;

  static PolynomialMapCoeffs from_polys(const std::vector<MultiPoly>& comps, int d);
  static PolynomialMapCoeffs linear(const Mat& A, const Vec& b);
};

struct ExpandOptions {
  double radius = 0.5;  // round-trip test points drawn from [-radius, radius]^d
  int points = 100;
  double tol = 1e-10;
  std::uint64_t seed = 7;
};

PolynomialMapCoeffs expand_polynomial_map(const StepMap& f, int D_max, const ExpandOptions& opt = {});

/// Total degree of f restricted to a random line, over F_p, using bound + 2 samples.
/// Returns bound + 1 when the degree exceeds bound.
int measure_degree(const StepMap& f, int bound, std::uint64_t seed = 11);

struct ComposedStep {
  StepMap map;
  double D_A = 0;      // q K_s K_c
  double D_t = 0;      // D_A^{K_t} q^{L_t}
  double D_sched = 0;  // q^{K_max+L_max} (K_s K_c)^{K_max}
  double C_t = 0;      // sum_{r < K_t + L_t} Lambda^r
  double error_bound = 0;
};

ComposedStep compose_schedule(int K_t, int L_t, int t, const StepSchedule& s, const GradientModel& g,
                              const OddPolynomial& Ps, const OddPolynomial& Pc, int K_max, int L_max,
                              double Lambda = 1.0, double eps_sub = 0.0);

double composition_constant(double Lambda, int K_t, int L_t);

/// (1 + eta_u L_{u,delta}) eps_nl + eta_u eps_u_grad.
double base_step_error_bound(double eps_nl_step, double eta_u, double L_u_delta, double eps_u_grad);

/// sqrt(m) (eta_delta delta_s + eps delta_c).
double one_step_perturbation_bound(int m, double eta_delta, double delta_s, double eps, double delta_c);

}  // namespace crt
