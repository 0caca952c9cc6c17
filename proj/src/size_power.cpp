#include "medtest/size_power.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "medtest/roots.hpp"

namespace medtest {

namespace {

// Tight enough that discrepancies near the 1e-9 (or 1e-16) calibration target
// keep several correct digits.
const quad::Tolerance kTight{1e-16, 1e-13, 400};

void check_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("alpha must lie in (0, 1)");
}

void check_b(double b)
{
    if (!(b >= 0.0 && b <= 1.0)) throw std::domain_error("b must lie in [0, 1]");
}

// Weight of g(v; lambda) dv after v = u^2, divided by exp(shift), with shift
// folded into the exponent so nothing underflows before the division.
inline double pdf_weight(double u, double s, double shift)
{
    const double e = std::exp(-0.5 * (u - s) * (u - s) - shift);
    return kInvSqrt2Pi * e * (1.0 + std::exp(-2.0 * u * s));
}

// Same for d/dlambda g(v; lambda) dv = (g3 - g) / 2 dv.
inline double dpdf_weight(double u, double s, double shift)
{
    const double e = kInvSqrt2Pi * std::exp(-0.5 * (u - s) * (u - s) - shift);
    const double decay = std::exp(-2.0 * u * s);
    const double g3 = s > 0.0 ? -u * std::expm1(-2.0 * u * s) / s : 2.0 * u * u;
    return 0.5 * e * (g3 - (1.0 + decay));
}

struct Piece {
    double v_lo;
    double v_hi;
};

// Integral over pieces of h_k(v) against the (derivative) pdf weight, scaled by
// exp(-(u_top - s)^2 / 2) when the mass of g(.; lambda) lies beyond u_top.
template <class H>
ScaledValue weighted_integral(const std::array<Piece, 2>& pieces, const H& h, double lambda,
                              bool derivative)
{
    const double s = std::sqrt(lambda);
    double u_top = 0.0;
    for (const auto& p : pieces) u_top = std::max(u_top, std::sqrt(p.v_hi));
    double shift = 0.0;
    if (std::isfinite(u_top) && s > u_top) shift = -0.5 * (u_top - s) * (u_top - s);
    double total = 0.0;
    for (std::size_t k = 0; k < pieces.size(); ++k) {
        const auto& p = pieces[k];
        if (!(p.v_hi > p.v_lo)) continue;
        auto f = [&](double u) {
            const double w = derivative ? dpdf_weight(u, s, shift) : pdf_weight(u, s, shift);
            return w == 0.0 ? 0.0 : h(k, u * u) * w;
        };
        if (std::isinf(p.v_hi))
            total += quad::integrate_to_infinity(f, std::sqrt(p.v_lo), kTight).value;
        else
            total += quad::integrate(f, std::sqrt(p.v_lo), std::sqrt(p.v_hi), kTight).value;
    }
    return {total, shift};
}

ScaledValue discrepancy_impl(double alpha, double b, double lambda, bool derivative)
{
    check_alpha(alpha);
    check_b(b);
    const double c = chisq1_critical(alpha);
    if (b == 0.0) {
        // Every point with v1 > 0 is rejected.
        if (derivative) return {0.0, 0.0};
        return {1.0 - alpha, 0.0};
    }
    auto h = [&](std::size_t k, double v) {
        if (k == 0) return detail::central_cdf(v / b) - detail::central_cdf(b * v) - alpha;
        return (1.0 - alpha) - detail::central_cdf(b * v);
    };
    return weighted_integral({Piece{0.0, c}, Piece{c, c / b}}, h, lambda, derivative);
}

ScaledValue truncated_impl(double alpha, double b, double lambda, bool derivative)
{
    check_alpha(alpha);
    check_b(b);
    const double c = chisq1_critical(alpha);
    auto h = [&](std::size_t k, double v) {
        if (k == 0) return detail::central_cdf(v / b) - detail::central_cdf(b * v) - alpha;
        return 1.0 - 2.0 * alpha - detail::central_cdf(b * v);
    };
    return weighted_integral({Piece{0.0, b * c}, Piece{b * c, c}}, h, lambda, derivative);
}

double exact_closed_form(const ExactTestSpec& spec, const NoncentralityPair& nc)
{
    return exact_added_power(spec, nc) + power_lr(spec.alpha, nc);
}

}  // namespace

bool ScaledValue::at_most(double bound) const
{
    if (mantissa > 0.0) return bound > 0.0 && std::log(mantissa) + log_scale <= std::log(bound);
    if (bound >= 0.0) return true;
    if (mantissa == 0.0) return false;
    return std::log(-mantissa) + log_scale >= std::log(-bound);
}

double nrp_lr(double alpha, Noncentrality lambda)
{
    check_alpha(alpha);
    return alpha * nc_chisq1_sf(chisq1_critical(alpha), lambda);
}

double power_lr(double alpha, const NoncentralityPair& nc)
{
    check_alpha(alpha);
    const double c = chisq1_critical(alpha);
    return nc_chisq1_sf(c, nc.lambda1) * nc_chisq1_sf(c, nc.lambda2);
}

double a_integral(double alpha, double b, Noncentrality lambda)
{
    check_alpha(alpha);
    if (!(b > 0.0 && b <= 1.0)) throw std::domain_error("a_integral: b must lie in (0, 1]");
    const double c = chisq1_critical(alpha);
    const double s = std::sqrt(lambda.value());
    auto f = [&](double u) {
        const double v = u * u;
        const double wl = norm_pdf(u - s) + norm_pdf(u + s);
        const double w0 = 2.0 * norm_pdf(u);
        return wl * detail::central_cdf(v / b) + w0 * detail::cdf1_sqrt(u / std::sqrt(b), s);
    };
    return quad::integrate(f, 0.0, std::sqrt(c), kTight).value;
}

double nrp_simply_augmented(double alpha, double b, Noncentrality lambda)
{
    return alpha + discrepancy(alpha, b, lambda);
}

double discrepancy(double alpha, double b, Noncentrality lambda)
{
    return discrepancy_impl(alpha, b, lambda, false).value();
}

double discrepancy_dlambda(double alpha, double b, Noncentrality lambda)
{
    return discrepancy_impl(alpha, b, lambda, true).value();
}

ScaledValue discrepancy_scaled(double alpha, double b, Noncentrality lambda)
{
    return discrepancy_impl(alpha, b, lambda, false);
}

ScaledValue discrepancy_dlambda_scaled(double alpha, double b, Noncentrality lambda)
{
    return discrepancy_impl(alpha, b, lambda, true);
}

double truncated_discrepancy(double alpha, double b, Noncentrality lambda)
{
    return truncated_impl(alpha, b, lambda, false).value();
}

double truncated_discrepancy_dlambda(double alpha, double b, Noncentrality lambda)
{
    return truncated_impl(alpha, b, lambda, true).value();
}

ScaledValue truncated_discrepancy_scaled(double alpha, double b, Noncentrality lambda)
{
    return truncated_impl(alpha, b, lambda, false);
}

ScaledValue truncated_discrepancy_dlambda_scaled(double alpha, double b, Noncentrality lambda)
{
    return truncated_impl(alpha, b, lambda, true);
}

double power_simply_augmented(double alpha, double b, const NoncentralityPair& nc)
{
    check_alpha(alpha);
    check_b(b);
    if (b == 0.0) return 1.0;
    const double c = chisq1_critical(alpha);
    const double s1 = std::sqrt(nc.lambda1.value());
    const double s2 = std::sqrt(nc.lambda2.value());
    const double rb = 1.0 / std::sqrt(b);
    auto f = [&](double u) {
        const double w1 = norm_pdf(u - s1) + norm_pdf(u + s1);
        const double w2 = norm_pdf(u - s2) + norm_pdf(u + s2);
        return w1 * detail::cdf1_sqrt(u * rb, s2) + w2 * detail::cdf1_sqrt(u * rb, s1);
    };
    const double integral = quad::integrate(f, 0.0, std::sqrt(c), kTight).value;
    const double g1 = nc_chisq1_cdf(c, nc.lambda1);
    const double g2 = nc_chisq1_cdf(c, nc.lambda2);
    return power_lr(alpha, nc) - g1 * g2 + integral;
}

double exact_added_power(const ExactTestSpec& spec, const NoncentralityPair& nc)
{
    const double c = spec.knots.back();
    double added = nc_chisq1_cdf(c, nc.lambda1) * nc_chisq1_cdf(c, nc.lambda2);
    double prev1 = 0.0;
    double prev2 = 0.0;
    for (double z : spec.knots) {
        const double g1 = nc_chisq1_cdf(z, nc.lambda1);
        const double g2 = nc_chisq1_cdf(z, nc.lambda2);
        added -= prev1 * (g2 - prev2) + prev2 * (g1 - prev1);
        prev1 = g1;
        prev2 = g2;
    }
    return added;
}

double power_region(const Region& region, const NoncentralityPair& nc, const quad::Tolerance& tol)
{
    auto identity = [](double v) { return v; };
    auto lr_part = [&](double c) { return prob_v1_simple_upper(nc, c, identity, tol); };
    return std::visit(
        [&](const auto& r) -> double {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, LrRegion>) {
                check_alpha(r.alpha);
                return lr_part(chisq1_critical(r.alpha));
            } else if constexpr (std::is_same_v<T, WaldRegion>) {
                check_alpha(r.alpha);
                const double c = chisq1_critical(r.alpha);
                // W > c  <=>  v1 > c and v2 > c v1 / (v1 - c).
                auto lo = [c](double v1) {
                    const double d = v1 - c;
                    return d > 0.0 ? c * v1 / d : std::numeric_limits<double>::infinity();
                };
                return prob_v1_simple_upper(nc, c, lo, tol);
            } else if constexpr (std::is_same_v<T, SimplyAugmentedRegion>) {
                check_alpha(r.alpha);
                check_b(r.b);
                if (r.b == 0.0) return 1.0;
                const double c = chisq1_critical(r.alpha);
                const double b = r.b;
                auto lo = [b](double v2) { return b * v2; };
                auto hi = [c](double v2) { return std::min(v2, c); };
                return lr_part(c) + prob_v2_simple(nc, 0.0, c, lo, hi, tol) +
                       prob_v2_simple(nc, c, c / b, lo, hi, tol);
            } else if constexpr (std::is_same_v<T, TruncatedRegion>) {
                check_alpha(r.alpha);
                check_b(r.b);
                const double c = chisq1_critical(r.alpha);
                const double b = r.b;
                return lr_part(c) + prob_v2_simple(nc, 0.0, c, [b](double v2) { return b * v2; },
                                                   identity, tol);
            } else {
                const auto& knots = r.spec.knots;
                double total = lr_part(knots.back());
                double z_prev = 0.0;
                for (double z : knots) {
                    total += prob_v2_simple(nc, z_prev, z, [z_prev](double) { return z_prev; },
                                            identity, tol);
                    z_prev = z;
                }
                return total;
            }
        },
        region);
}

std::optional<double> power_region_closed_form(const Region& region, const NoncentralityPair& nc)
{
    if (const auto* lr = std::get_if<LrRegion>(&region)) return power_lr(lr->alpha, nc);
    if (const auto* ex = std::get_if<ExactRegion>(&region)) return exact_closed_form(ex->spec, nc);
    if (const auto* sa = std::get_if<SimplyAugmentedRegion>(&region))
        return power_simply_augmented(sa->alpha, sa->b, nc);
    return std::nullopt;
}

double rejection_probability(const Region& region, const NoncentralityPair& nc)
{
    if (auto p = power_region_closed_form(region, nc)) return *p;
    return power_region(region, nc);
}

double null_rejection_probability(const Region& region, Noncentrality lambda)
{
    if (const auto* lr = std::get_if<LrRegion>(&region)) return nrp_lr(lr->alpha, lambda);
    if (const auto* sa = std::get_if<SimplyAugmentedRegion>(&region))
        return nrp_simply_augmented(sa->alpha, sa->b, lambda);
    if (const auto* tr = std::get_if<TruncatedRegion>(&region))
        return tr->alpha + truncated_discrepancy(tr->alpha, tr->b, lambda);
    return rejection_probability(region, NoncentralityPair::null(lambda));
}

double rectangle_excess(double alpha, double epsilon, Noncentrality lambda)
{
    if (!(epsilon > 0.0 && epsilon < alpha && alpha <= 0.5))
        throw std::domain_error("rectangle_excess: need 0 < epsilon < alpha <= 1/2");
    const double c = chisq1_critical(alpha);
    const double z1 = chisq1_critical(alpha + epsilon);
    const double z2 = chisq1_critical(alpha - epsilon);
    return -alpha * nc_chisq1_cdf(c, lambda) +
           epsilon * (nc_chisq1_cdf(z2, lambda) - nc_chisq1_cdf(z1, lambda));
}

std::optional<double> first_positive_rectangle_excess(double alpha, double epsilon, double upper,
                                                      double step)
{
    auto f = [&](double l) { return rectangle_excess(alpha, epsilon, l); };
    double prev = 0.0;
    for (int i = 0;; ++i) {
        const double l = i * step;
        if (l > upper) break;
        if (f(l) > 0.0) {
            if (i == 0) return 0.0;
            return bisect(f, prev, l, 1e-6);
        }
        prev = l;
    }
    return std::nullopt;
}

std::optional<BoundParams> tabulated_bound_params(double alpha)
{
    struct Row {
        double alpha, gamma0, gamma1;
    };
    static constexpr std::array<Row, 7> rows = {{{0.01, 0.01587, -0.00917},
                                                  {0.05, 0.07823, -0.04917},
                                                  {0.10, 0.41014, -0.28018},
                                                  {0.20, 0.46939, -0.41971},
                                                  {0.30, 0.37195, -0.42148},
                                                  {0.40, 0.19823, -0.28368},
                                                  {0.49, 0.0200998, -0.0353299}}};
    for (const auto& r : rows)
        if (std::fabs(r.alpha - alpha) < 1e-12) return BoundParams{r.gamma0, r.gamma1};
    return std::nullopt;
}

double truncated_bound_c1(double alpha, const BoundParams& bp, double lambda)
{
    check_alpha(alpha);
    const double c = chisq1_critical(alpha);
    const double r = std::sqrt(c);
    const double s = std::sqrt(lambda);
    const double d = s - r;
    return bp.gamma0 / d + bp.gamma1 * (r * s - 1.0 - c) / (d * d + 1.0);
}

namespace {

// ub * sqrt(2 pi) * exp(lambda / 2); same sign as ub.
double bound_kernel(double alpha, const BoundParams& bp, double lambda)
{
    const double c = chisq1_critical(alpha);
    const double r = std::sqrt(c);
    const double s = std::sqrt(lambda);
    const double c1 = truncated_bound_c1(alpha, bp, lambda);
    const double c2 = (r + s) * (bp.gamma0 - bp.gamma1 * s) / (1.0 + c + 2.0 * r * s + lambda);
    return std::exp(-0.5 * c + r * s) * c1 - std::exp(-0.5 * c - r * s) * c2 - 2.0 * bp.gamma1;
}

template <class F>
double last_crossing(F&& f, double c, double upper)
{
    const double step = 0.01;
    const double floor = c * (1.0 + 1e-6);
    double hi = upper;
    const bool sign_hi = f(hi) < 0.0;
    for (double l = upper - step; l > floor; l -= step) {
        if ((f(l) < 0.0) != sign_hi) return bisect(f, l, hi, 1e-10);
        hi = l;
    }
    throw NonConvergence("no sign change above the pole at chi2_alpha");
}

}  // namespace

double truncated_bound_ub(double alpha, const BoundParams& bp, double lambda)
{
    check_alpha(alpha);
    const double c = chisq1_critical(alpha);
    if (!(lambda > 0.25 * c) || !std::isfinite(lambda))
        throw std::domain_error("truncated_bound_ub: requires lambda > chi2_alpha / 4");
    return std::exp(-0.5 * lambda) * kInvSqrt2Pi * bound_kernel(alpha, bp, lambda);
}

double bound_crossing(double alpha, const BoundParams& bp, double upper)
{
    check_alpha(alpha);
    return last_crossing([&](double l) { return bound_kernel(alpha, bp, l); },
                         chisq1_critical(alpha), upper);
}

double bound_c1_crossing(double alpha, const BoundParams& bp, double upper)
{
    check_alpha(alpha);
    return last_crossing([&](double l) { return truncated_bound_c1(alpha, bp, l); },
                         chisq1_critical(alpha), upper);
}

void write_curve_csv(std::ostream& os, const std::vector<std::pair<double, double>>& curve)
{
    char buf[64];
    os << "lambda,value\n";
    for (const auto& [l, v] : curve) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", l, v);
        os << buf;
    }
}

}  // namespace medtest
