#pragma once

// Null rejection probabilities, power, discrepancy functions and the bound
// functions for the truncated test.

#include <iosfwd>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "medtest/order_stats.hpp"
#include "medtest/test_rules.hpp"

namespace medtest {

/// mantissa * exp(log_scale); lets discrepancies far below the double range
/// keep their sign and magnitude.
struct ScaledValue {
    double mantissa = 0.0;
    double log_scale = 0.0;

    double value() const { return mantissa == 0.0 ? 0.0 : mantissa * std::exp(log_scale); }
    /// True when value() <= bound, decided without overflow or underflow.
    bool at_most(double bound) const;
};

double nrp_lr(double alpha, Noncentrality lambda);
double power_lr(double alpha, const NoncentralityPair& nc);

double a_integral(double alpha, double b, Noncentrality lambda);
double nrp_simply_augmented(double alpha, double b, Noncentrality lambda);

/// D(b, lambda) = NRP of LR(b) minus alpha.
double discrepancy(double alpha, double b, Noncentrality lambda);
double discrepancy_dlambda(double alpha, double b, Noncentrality lambda);
ScaledValue discrepancy_scaled(double alpha, double b, Noncentrality lambda);
ScaledValue discrepancy_dlambda_scaled(double alpha, double b, Noncentrality lambda);

/// Discrepancy of the test augmented only below v2 = chi2_alpha.
double truncated_discrepancy(double alpha, double b, Noncentrality lambda);
double truncated_discrepancy_dlambda(double alpha, double b, Noncentrality lambda);
ScaledValue truncated_discrepancy_scaled(double alpha, double b, Noncentrality lambda);
ScaledValue truncated_discrepancy_dlambda_scaled(double alpha, double b, Noncentrality lambda);

double power_simply_augmented(double alpha, double b, const NoncentralityPair& nc);

struct LrRegion {
    double alpha;
};
struct WaldRegion {
    double alpha;
};
struct SimplyAugmentedRegion {
    double alpha;
    double b;
};
struct TruncatedRegion {
    double alpha;
    double b;
};
struct ExactRegion {
    ExactTestSpec spec;
};
using Region = std::variant<LrRegion, WaldRegion, SimplyAugmentedRegion, TruncatedRegion, ExactRegion>;

/// Rejection probability of a region by quadrature over the octant.
double power_region(const Region& region, const NoncentralityPair& nc,
                    const quad::Tolerance& tol = {1e-13, 1e-11, 400});
/// Closed forms where they exist (LR, exact, simply augmented); nullopt otherwise.
std::optional<double> power_region_closed_form(const Region& region, const NoncentralityPair& nc);
/// Closed form when available, quadrature otherwise.
double rejection_probability(const Region& region, const NoncentralityPair& nc);
/// Rejection probability at the null (0, lambda), through the discrepancy
/// integrals where they apply.
double null_rejection_probability(const Region& region, Noncentrality lambda);

/// Power added to LR by the exact test's extra region.
double exact_added_power(const ExactTestSpec& spec, const NoncentralityPair& nc);

/// NRP of CR_LR plus the rectangle {chi2_{alpha+eps} < v1 < chi2_alpha <
/// v2 < chi2_{alpha-eps}}, minus alpha.
double rectangle_excess(double alpha, double epsilon, Noncentrality lambda);
/// Smallest lambda in [0, upper] with positive rectangle excess: scan with the
/// given step, then bisect to 1e-6.
std::optional<double> first_positive_rectangle_excess(double alpha, double epsilon,
                                                      double upper = 500.0, double step = 0.5);

struct BoundParams {
    double gamma0;
    double gamma1;
    double lambda0 = 0.0;
    double b_star = 0.0;
    double lambda_star = 0.0;
};

/// Linear bounds gamma0 + gamma1 sqrt(v) on the truncated discrepancy
/// integrands, tabulated for alpha in {.01,.05,.1,.2,.3,.4,.49}.
std::optional<BoundParams> tabulated_bound_params(double alpha);

/// Upper bound ub_alpha(lambda) on the truncated discrepancy for lambda >
/// chi2_alpha / 4 (pole at lambda = chi2_alpha).
double truncated_bound_ub(double alpha, const BoundParams& bp, double lambda);
/// Coefficient c1 of the dominant exponential in ub.
double truncated_bound_c1(double alpha, const BoundParams& bp, double lambda);
/// Last lambda where ub changes sign, searched downward from `upper`.
double bound_crossing(double alpha, const BoundParams& bp, double upper = 1000.0);
/// Last lambda where c1 changes sign.
double bound_c1_crossing(double alpha, const BoundParams& bp, double upper = 1000.0);

/// Writes `lambda,value` rows.
void write_curve_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve);

}  // namespace medtest
