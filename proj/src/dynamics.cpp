#include "crt/dynamics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>

#include "crt/errors.hpp"

namespace crt {

namespace {

std::vector<double> to_std(const Vec& v) { return {v.data(), v.data() + v.size()}; }
Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double multinomial(const std::vector<int>& e) {
  double r = 1.0;
  int acc = 0;
  for (int k : e) {
    for (int i = 1; i <= k; ++i) r = r * (acc + i) / i;
    acc += k;
  }
  return std::round(r);
}

}  // namespace

Vec CoupledState::stacked() const {
  Vec v(d());
  v << delta, u;
  return v;
}

CoupledState CoupledState::split(const Vec& v, int m) {
  return {v.head(m), v.tail(v.size() - m)};
}

int GradientModel::q() const {
  int q = 1;
  for (const auto& s : steps) {
    for (const auto& p : s.g_delta) q = std::max(q, p.degree());
    for (const auto& p : s.g_u) q = std::max(q, p.degree());
  }
  return q;
}

const GradientStep& GradientModel::at(int t) const {
  if (steps.empty()) throw InvalidArgument("gradient model has no steps");
  return steps[std::min<std::size_t>(static_cast<std::size_t>(t), steps.size() - 1)];
}

double GradientModel::lipschitz_u_delta(int t) const {
  if (L_u_delta.empty()) return 0.0;
  return L_u_delta[std::min<std::size_t>(static_cast<std::size_t>(t), L_u_delta.size() - 1)];
}

Vec GradientModel::surrogate_g_delta(const Vec& v, int t) const {
  const auto x = to_std(v);
  Vec out(m);
  for (int i = 0; i < m; ++i) out(i) = at(t).g_delta[i].eval(x);
  return out;
}

Vec GradientModel::surrogate_g_u(const Vec& v, int t) const {
  const auto x = to_std(v);
  Vec out(n);
  for (int i = 0; i < n; ++i) out(i) = at(t).g_u[i].eval(x);
  return out;
}

Vec GradientModel::g_delta(const Vec& v, int t) const {
  return exact_g_delta ? exact_g_delta(v, t) : surrogate_g_delta(v, t);
}

Vec GradientModel::g_u(const Vec& v, int t) const {
  return exact_g_u ? exact_g_u(v, t) : surrogate_g_u(v, t);
}

GradientModel GradientModel::affine_model(const Mat& A_d, const Vec& b_d, const Mat& A_u,
                                          const Vec& b_u) {
  const int m = static_cast<int>(A_d.rows());
  const int n = static_cast<int>(A_u.rows());
  const int d = m + n;
  if (A_d.cols() != d || A_u.cols() != d || b_d.size() != m || b_u.size() != n) {
    throw DimensionMismatch("affine gradient blocks must be m x d and n x d");
  }
  auto row_poly = [d](const Mat& A, const Vec& b, int i) {
    MultiPoly p = MultiPoly::constant(d, b(i));
    for (int j = 0; j < d; ++j) {
      if (A(i, j) != 0.0) p += MultiPoly::variable(d, j) * A(i, j);
    }
    return p;
  };
  GradientModel g;
  g.affine = true;
  g.m = m;
  g.n = n;
  GradientStep s;
  for (int i = 0; i < m; ++i) s.g_delta.push_back(row_poly(A_d, b_d, i));
  for (int i = 0; i < n; ++i) s.g_u.push_back(row_poly(A_u, b_u, i));
  g.steps.push_back(std::move(s));
  g.L_u_delta = {m > 0 ? spectral_norm(Mat(A_u.leftCols(m))) : 0.0};
  return g;
}

double StepSchedule::pick(const std::vector<double>& v, int t) {
  if (v.empty()) throw InvalidArgument("schedule entry is empty");
  return v[std::min<std::size_t>(static_cast<std::size_t>(t), v.size() - 1)];
}

void StepSchedule::validate(int K_max, int L_max) const {
  if (T < 0) throw InvalidArgument("T must be >= 0");
  if (!(eps > 0)) throw InvalidArgument("eps must be positive");
  for (const auto* vec : {&eta_delta, &eta_u, &alpha}) {
    if (vec->empty()) throw InvalidArgument("schedule step sizes and alpha must be set");
    for (double x : *vec) {
      if (!(x > 0)) throw InvalidArgument("step sizes and alpha must be positive");
    }
  }
  for (int k : K_sub) {
    if (k < 1 || k > K_max) throw InvalidArgument("K_t out of [1, K_max]");
  }
  for (int l : L_sub) {
    if (l < 1 || l > L_max) throw InvalidArgument("L_t out of [1, L_max]");
  }
}

StepSchedule StepSchedule::constant(int T, double eps, double eta_delta, double eta_u, double alpha) {
  StepSchedule s;
  s.T = T;
  s.eps = eps;
  s.eta_delta = {eta_delta};
  s.eta_u = {eta_u};
  s.alpha = {alpha};
  for (int t = 0; t < T; ++t) s.sample.push_back(t);
  return s;
}

nlohmann::json DomainMonitor::to_json() const {
  return {{"evaluations", evaluations},       {"grad_out_of_range", grad_out_of_range},
          {"clip_out_of_range", clip_out_of_range}, {"dead_zone_hits", dead_zone_hits},
          {"clip_band_hits", clip_band_hits}, {"max_norm_grad", max_norm_grad},
          {"max_clip_arg", max_clip_arg},     {"clean", clean()}};
}

CoupledState exact_outer_step(const CoupledState& v, int t, const StepSchedule& s,
                              const GradientModel& g) {
  const Vec x = v.stacked();
  CoupledState out = v;
  const Vec gd = g.g_delta(x, t);
  for (int i = 0; i < v.m(); ++i) {
    out.delta(i) = std::clamp(v.delta(i) + s.eta_d(t) * exact_sign(gd(i)), -s.eps, s.eps);
  }
  CoupledState mid{s.simultaneous ? v.delta : out.delta, v.u};
  out.u = v.u - s.eta_p(t) * g.g_u(mid.stacked(), t);
  return out;
}

CoupledState folded_poly_step(const CoupledState& v, int t, const StepSchedule& s,
                              const GradientModel& g, const OddPolynomial& Ps,
                              const OddPolynomial& Pc, DomainMonitor* mon) {
  auto r = folded_step(to_std(v.stacked()), t, s, g, Ps, Pc, mon);
  return CoupledState::split(to_vec(r), v.m());
}

std::vector<CoupledState> run_exact(const CoupledState& v0, const StepSchedule& s,
                                    const GradientModel& g) {
  std::vector<CoupledState> traj{v0};
  for (int t = 0; t < s.T; ++t) traj.push_back(exact_outer_step(traj.back(), t, s, g));
  return traj;
}

std::vector<CoupledState> run_folded(const CoupledState& v0, const StepSchedule& s,
                                     const GradientModel& g, const OddPolynomial& Ps,
                                     const OddPolynomial& Pc, DomainMonitor* mon) {
  std::vector<CoupledState> traj{v0};
  for (int t = 0; t < s.T; ++t) traj.push_back(folded_poly_step(traj.back(), t, s, g, Ps, Pc, mon));
  return traj;
}

double default_alpha(const GradientModel& g, int t, const std::vector<Vec>& probes) {
  double mx = 0.0;
  for (const auto& v : probes) mx = std::max(mx, g.surrogate_g_delta(v, t).cwiseAbs().maxCoeff());
  if (!(mx > 0)) return 1.0;
  return 1.1 * mx;
}

void write_trajectory_csv(const std::vector<CoupledState>& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  if (traj.empty()) return;
  out << "t";
  for (int i = 0; i < traj[0].m(); ++i) out << ",delta" << i;
  for (int i = 0; i < traj[0].n(); ++i) out << ",u" << i;
  out << "\n" << std::setprecision(17);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    out << t;
    for (int i = 0; i < traj[t].m(); ++i) out << "," << traj[t].delta(i);
    for (int i = 0; i < traj[t].n(); ++i) out << "," << traj[t].u(i);
    out << "\n";
  }
}

Vec StepMap::operator()(const Vec& v) const { return to_vec(f64(to_std(v))); }

namespace {
template <class R>
std::function<std::vector<R>(const std::vector<R>&)> recenter_fn(
    std::function<std::vector<R>(const std::vector<R>&)> f, std::vector<double> ref,
    std::vector<double> scale) {
  return [f = std::move(f), ref = std::move(ref), scale = std::move(scale)](const std::vector<R>& z) {
    std::vector<R> v(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) v[i] = z[i] * scale[i] + ref[i];
    auto out = f(v);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (out[i] - ref[i]) * (1.0 / scale[i]);
    return out;
  };
}
}  // namespace

StepMap recentered(const StepMap& f, const Vec& ref, const Vec& scale) {
  if (ref.size() != f.d || scale.size() != f.d) throw DimensionMismatch("recentering vectors need length d");
  StepMap s;
  s.d = f.d;
  s.f64 = recenter_fn<double>(f.f64, to_std(ref), to_std(scale));
  s.fpoly = recenter_fn<MultiPoly>(f.fpoly, to_std(ref), to_std(scale));
  s.fmod = recenter_fn<ModP>(f.fmod, to_std(ref), to_std(scale));
  return s;
}

StepMap folded_step_map(int t, const StepSchedule& s, const GradientModel& g,
                        const OddPolynomial& Ps, const OddPolynomial& Pc) {
  return make_step_map(g.d(), [t, s, g, Ps, Pc](const auto& v) { return folded_step(v, t, s, g, Ps, Pc); });
}

SpMat PolynomialMapCoeffs::Q(int l) const {
  const std::int64_t cols = checked_pow(d, l, std::int64_t{1} << 40);
  SpMat q(d, cols);
  if (l > D) return q;
  std::vector<Triplet> trips;
  for (const auto& term : by_degree[l]) {
    std::vector<int> idx;
    for (int i = 0; i < d; ++i) idx.insert(idx.end(), term.exps[i], i);
    const double np = multinomial(term.exps);
    do {
      std::int64_t col = 0;
      for (int k : idx) col = col * d + k;
      for (int i = 0; i < d; ++i) {
        if (term.coef(i) != 0.0) trips.emplace_back(i, col, term.coef(i) / np);
      }
    } while (std::next_permutation(idx.begin(), idx.end()));
  }
  // Row-major fill without the column-major staging copy (d^l can be large).
  std::sort(trips.begin(), trips.end(), [](const Triplet& a, const Triplet& b) {
    return a.row() != b.row() ? a.row() < b.row() : a.col() < b.col();
  });
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1> per_row = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>::Zero(d);
  for (const auto& t : trips) ++per_row(t.row());
  q.reserve(per_row);
  for (std::size_t k = 0; k < trips.size(); ++k) {
    if (k > 0 && trips[k].row() == trips[k - 1].row() && trips[k].col() == trips[k - 1].col()) {
      q.coeffRef(trips[k].row(), trips[k].col()) += trips[k].value();
    } else {
      q.insert(trips[k].row(), trips[k].col()) = trips[k].value();
    }
  }
  q.makeCompressed();
  return q;
}

double PolynomialMapCoeffs::norm(int l) const {
  if (l > D) return 0.0;
  Mat G = Mat::Zero(d, d);
  for (const auto& term : by_degree[l]) G += term.coef * term.coef.transpose() / multinomial(term.exps);
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

std::int64_t PolynomialMapCoeffs::row_sparsity(int l) const {
  if (l > D) return 0;
  std::vector<double> cnt(d, 0.0);
  for (const auto& term : by_degree[l]) {
    const double np = multinomial(term.exps);
    for (int i = 0; i < d; ++i) {
      if (term.coef(i) != 0.0) cnt[i] += np;
    }
  }
  return static_cast<std::int64_t>(*std::max_element(cnt.begin(), cnt.end()));
}

Vec PolynomialMapCoeffs::eval(const Vec& v) const {
  Vec out = Vec::Zero(d);
  for (const auto& level : by_degree) {
    for (const auto& term : level) {
      double mono = 1.0;
      for (int i = 0; i < d; ++i) mono *= std::pow(v(i), term.exps[i]);
      out += mono * term.coef;
    }
  }
  return out;
}

Vec PolynomialMapCoeffs::eval_tensor(const Vec& v) const {
  Vec out = Vec::Zero(d);
  Vec pw = Vec::Ones(1);
  for (int l = 0; l <= D; ++l) {
    out += Q(l) * pw;
    Vec next(pw.size() * d);
    for (Eigen::Index a = 0; a < pw.size(); ++a) next.segment(a * d, d) = pw(a) * v;
    pw = std::move(next);
  }
  return out;
}

nlohmann::json PolynomialMapCoeffs::to_json() const {
  nlohmann::json j;
  j["d"] = d;
  j["D"] = D;
  j["roundtrip_residual"] = roundtrip_residual;
  nlohmann::json levels = nlohmann::json::array();
  for (int l = 0; l <= D; ++l) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& t : by_degree[l]) {
      std::vector<int> tuple;
      for (int i = 0; i < d; ++i) tuple.insert(tuple.end(), t.exps[i], i + 1);
      terms.push_back({{"index_tuple", tuple},
                       {"exponents", t.exps},
                       {"coefficient", std::vector<double>(t.coef.data(), t.coef.data() + d)}});
    }
    levels.push_back({{"degree", l}, {"norm", norm(l)}, {"row_sparsity", row_sparsity(l)}, {"terms", terms}});
  }
  j["levels"] = levels;
  return j;
}

PolynomialMapCoeffs PolynomialMapCoeffs::from_polys(const std::vector<MultiPoly>& comps, int d) {
  if (static_cast<int>(comps.size()) != d) throw DimensionMismatch("need d component polynomials");
  PolynomialMapCoeffs c;
  c.d = d;
  std::map<std::uint64_t, Vec> merged;
  for (int i = 0; i < d; ++i) {
    for (const auto& [key, val] : comps[i].terms()) {
      auto it = merged.find(key);
      if (it == merged.end()) it = merged.emplace(key, Vec::Zero(d)).first;
      it->second(i) = val;
    }
  }
  for (const auto& [key, coef] : merged) c.D = std::max(c.D, MultiPoly::key_degree(key));
  c.by_degree.assign(c.D + 1, {});
  for (const auto& [key, coef] : merged) {
    c.by_degree[MultiPoly::key_degree(key)].push_back({MultiPoly::unpack(key, d), coef});
  }
  return c;
}

PolynomialMapCoeffs PolynomialMapCoeffs::linear(const Mat& A, const Vec& b) {
  const int d = static_cast<int>(A.rows());
  std::vector<MultiPoly> comps;
  for (int i = 0; i < d; ++i) {
    MultiPoly p = MultiPoly::constant(d, b(i));
    for (int j = 0; j < d; ++j) {
      if (A(i, j) != 0.0) p += MultiPoly::variable(d, j) * A(i, j);
    }
    comps.push_back(p);
  }
  return from_polys(comps, d);
}

PolynomialMapCoeffs expand_polynomial_map(const StepMap& f, int D_max, const ExpandOptions& opt) {
  std::vector<MultiPoly> vars;
  for (int i = 0; i < f.d; ++i) vars.push_back(MultiPoly::variable(f.d, i));
  auto comps = f.fpoly(vars);
  for (auto& p : comps) {
    if (p.degree() > D_max) {
      throw DegreeOverflow("step map has degree " + std::to_string(p.degree()) + " > D_max = " +
                           std::to_string(D_max));
    }
  }
  auto c = PolynomialMapCoeffs::from_polys(comps, f.d);
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U(-opt.radius, opt.radius);
  double worst = 0.0;
  for (int k = 0; k < opt.points; ++k) {
    Vec v(f.d);
    for (auto& x : v) x = U(rng);
    Vec direct = f(v);
    Vec rec = c.eval(v);
    worst = std::max(worst, (direct - rec).norm() / (1.0 + direct.norm()));
  }
  c.roundtrip_residual = worst;
  if (worst > opt.tol) {
    throw DegreeOverflow("expansion round-trip residual " + std::to_string(worst) +
                         " exceeds tolerance");
  }
  return c;
}

int measure_degree(const StepMap& f, int bound, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto rnd = [&] { return ModP::raw(rng() >> 3); };
  std::vector<ModP> a(f.d), b(f.d), w(f.d);
  for (int i = 0; i < f.d; ++i) {
    a[i] = rnd();
    b[i] = rnd();
    w[i] = rnd();
  }
  const int npts = bound + 2;
  std::vector<ModP> vals(npts);
  for (int k = 0; k < npts; ++k) {
    ModP s = ModP::raw(static_cast<std::uint64_t>(k));
    std::vector<ModP> v(f.d);
    for (int i = 0; i < f.d; ++i) v[i] = a[i] + s * b[i];
    auto out = f.fmod(v);
    ModP acc = ModP::raw(0);
    for (int i = 0; i < f.d; ++i) acc += w[i] * out[i];
    vals[k] = acc;
  }
  // Forward differences: Delta^k f(0) != 0 for the top k equals the degree.
  int deg = -1;
  for (int k = 0; k < npts; ++k) {
    if (vals[0] != ModP::raw(0)) deg = k;
    for (int i = 0; i + 1 < npts - k; ++i) vals[i] = vals[i + 1] - vals[i];
  }
  return deg;
}

double composition_constant(double Lambda, int K_t, int L_t) {
  double c = 0.0, p = 1.0;
  for (int r = 0; r < K_t + L_t; ++r) {
    c += p;
    p *= Lambda;
  }
  return c;
}

ComposedStep compose_schedule(int K_t, int L_t, int t, const StepSchedule& s, const GradientModel& g,
                              const OddPolynomial& Ps, const OddPolynomial& Pc, int K_max, int L_max,
                              double Lambda, double eps_sub) {
  if (K_t < 1 || L_t < 1 || K_t > K_max || L_t > L_max) {
    throw InvalidArgument("substep counts must satisfy 1 <= K_t <= K_max, 1 <= L_t <= L_max");
  }
  StepSchedule local = s;
  const int T = std::max(s.T, t + 1);
  local.K_sub.assign(T, 1);
  local.L_sub.assign(T, 1);
  local.K_sub[t] = K_t;
  local.L_sub[t] = L_t;
  ComposedStep c;
  c.map = folded_step_map(t, local, g, Ps, Pc);
  const double q = g.q();
  const double KsKc = static_cast<double>(Ps.degree()) * Pc.degree();
  c.D_A = q * KsKc;
  c.D_t = std::pow(c.D_A, K_t) * std::pow(q, L_t);
  c.D_sched = std::pow(q, K_max + L_max) * std::pow(KsKc, K_max);
  c.C_t = composition_constant(Lambda, K_t, L_t);
  c.error_bound = c.C_t * eps_sub;
  return c;
}

double base_step_error_bound(double eps_nl_step, double eta_u, double L_u_delta, double eps_u_grad) {
  if (eps_nl_step < 0 || eta_u < 0 || L_u_delta < 0 || eps_u_grad < 0) {
    throw InvalidArgument("base step error inputs must be nonnegative");
  }
  return (1.0 + eta_u * L_u_delta) * eps_nl_step + eta_u * eps_u_grad;
}

double one_step_perturbation_bound(int m, double eta_delta, double delta_s, double eps, double delta_c) {
  return std::sqrt(static_cast<double>(m)) * (eta_delta * delta_s + eps * delta_c);
}

}  // namespace crt
