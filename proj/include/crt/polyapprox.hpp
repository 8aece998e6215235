#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

namespace crt {

enum class Basis { Monomial, Chebyshev };

/// Odd polynomial P(x) = sum_k a_k phi_{2k+1}(x / scale), with phi the
/// monomial or Chebyshev basis. Only odd coefficients are stored.
struct OddPolynomial {
  Basis basis = Basis::Monomial;
  double scale = 1.0;
  std::vector<double> coeffs;  // a_0 multiplies phi_1, a_1 phi_3, ...

  static OddPolynomial identity() { return {Basis::Monomial, 1.0, {1.0}}; }

  int degree() const { return coeffs.empty() ? 0 : 2 * static_cast<int>(coeffs.size()) - 1; }

  /// Exactly odd evaluation: sign(x) * P(|x|), P(0) = 0.
  double operator()(double x) const;
  double derivative(double x) const;

  /// Monomial coefficients c_k of x^(2k+1) in the unscaled variable x.
  std::vector<double> monomial_coeffs() const;

  /// Generic-ring evaluation. Chebyshev uses odd Clenshaw on x / scale.
  template <class R>
  R eval(const R& x) const {
    const R y = x * (1.0 / scale);
    if (basis == Basis::Chebyshev) {
      // sum a_k T_{2k+1}(y) with T_{j+2} = 2(2y^2 - 1) T_j - T_{j-2}
      const R w = (y * y) * 4.0 + (-2.0);
      R b1 = y * 0.0, b2 = y * 0.0;
      for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) {
        R b0 = w * b1 - b2 + *it;
        b2 = b1;
        b1 = b0;
      }
      // T_1 = y, T_{-1} = y
      return (b1 - b2) * y;
    }
    const R y2 = y * y;
    R acc = y * 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * y2 + *it;
    return acc * y;
  }

  /// Sum of |coefficients| (used for rounding allowances).
  double coeff_l1() const;

  void save_text(const std::string& path) const;
  static OddPolynomial load_text(const std::string& path);
  nlohmann::json to_json() const;
};

struct SignSpec {
  double L = 1.0;
  double tau = 0.2;
  double delta = 0.05;
};

struct ClipSpec {
  double L_c = 2.0;
  double tau_c = 0.1;
  double delta_c = 0.02;
  double R_c() const { return L_c + 1.0; }
};

struct DesignOptions {
  int max_degree = 2001;
  double grid_density = 1e4;  // points per unit length
};

/// Records how a polynomial was obtained.
struct DesignRecord {
  int degree = 0;
  int candidates_tried = 0;
  double smoothing_k = 0.0;
};

enum class CheckKind { AbsBound, SignError, IdentityError };

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct RegionCheck {
  std::string name;
  std::vector<Interval> intervals;
  CheckKind kind = CheckKind::AbsBound;
  double bound = 0.0;
};

struct RegionReport {
  std::string name;
  double bound = 0.0;
  double grid_max = 0.0;       // max of the checked quantity on the grid
  double at = 0.0;             // location of grid_max
  double violation = 0.0;      // max(0, grid_max - bound)
  double inflation = 0.0;      // h * sup|e'| / 2
  double certified_sup = 0.0;  // rigorous upper bound on the sup (tent bound)
  double float_slack = 0.0;    // evaluation rounding allowance
  bool pass = false;
};

struct CertificateFragment {
  int degree = 0;
  double grid_step = 0.0;
  double deriv_sup = 0.0;  // certified sup |P'| on [-scale, scale]
  std::vector<RegionReport> regions;
  bool pass = false;
  nlohmann::json to_json() const;
};

CertificateFragment verify_poly_spec(const OddPolynomial& p, const std::vector<RegionCheck>& regions,
                                     double grid_density = 1e4);

std::vector<RegionCheck> sign_regions(const SignSpec& s);
std::vector<RegionCheck> clip_regions(const ClipSpec& c);

/// Smallest-degree odd P with |P| <= 1 on [-L, L] and |P - sign| <= delta on tau <= |x| <= L.
OddPolynomial design_sign_poly(const SignSpec& spec, const DesignOptions& opt = {},
                               DesignRecord* rec = nullptr);

using SignBuilder = std::function<OddPolynomial(const SignSpec&)>;

/// P_c(x) = ((x+1) S(x+1) - (x-1) S(x-1)) / 2 with S on [-R_c, R_c], gap tau_c, error delta_c / L_c.
OddPolynomial design_clip_poly(const ClipSpec& spec, const SignBuilder& sign_builder,
                               const DesignOptions& opt = {});
OddPolynomial design_clip_poly(const ClipSpec& spec, const DesignOptions& opt = {});

double exact_sign(double x);
double exact_sat(double x);
double shifted_sign_sat(double x);

struct DegreeBudget {
  double eps_nl_step = 0.0;
  double eta_delta_max = 0.0;
  double eps = 0.0;
  int m = 1;
  double tau_s = 0.2;
  double tau_c = 0.1;
  double L_c = 2.0;
  double C_s = 4.0;
  double c_s = 2.0;
};

struct DegreeChoice {
  double delta_s = 0.0;
  double delta_c = 0.0;
  double K_s_bound = 0.0;
  double K_c_bound = 0.0;
  std::string K_s_formula;
  std::string K_c_formula;
  nlohmann::json to_json() const;
};

DegreeChoice degrees_from_budget(const DegreeBudget& b);

}  // namespace crt
