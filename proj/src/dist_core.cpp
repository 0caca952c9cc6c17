#include "medtest/dist_core.hpp"

#include <algorithm>
#include <utility>

#include "medtest/roots.hpp"

namespace medtest {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

double log_norm_sf_asymptotic(double x)
{
    // Mills-ratio series, accurate to ~1e-13 relative for x >= 30.
    const double ix2 = 1.0 / (x * x);
    const double series =
        1.0 - ix2 * (1.0 - ix2 * (3.0 - ix2 * (15.0 - ix2 * (105.0 - ix2 * 945.0))));
    return -0.5 * x * x - std::log(x) - kLogSqrt2Pi + std::log(series);
}

void require_nonnegative(double v, const char* what)
{
    if (!(v >= 0.0)) throw std::domain_error(std::string(what) + ": argument must be >= 0");
}

double log_central_pdf(double v, int kappa)
{
    const double half = 0.5 * kappa;
    return -half * std::log(2.0) - std::lgamma(half) - 0.5 * v + (half - 1.0) * std::log(v);
}

double poisson_mixture_pdf(double v, double lambda, int kappa)
{
    if (lambda == 0.0) return std::exp(log_central_pdf(v, kappa));
    const double mu = 0.5 * lambda;
    const double log_mu = std::log(mu);
    auto log_term = [&](long j) {
        return -mu + j * log_mu - std::lgamma(j + 1.0) + log_central_pdf(v, kappa + 2 * int(j));
    };
    // Largest term sits near the Poisson mode shifted by the density factor;
    // scan outward from the Poisson mode in both directions.
    const long mode = static_cast<long>(std::floor(mu));
    const double peak = log_term(mode);
    double sum = 1.0;
    double ref = peak;
    for (long j = mode + 1;; ++j) {
        const double lt = log_term(j);
        if (lt > ref) {
            sum = sum * std::exp(ref - lt) + 1.0;
            ref = lt;
            continue;
        }
        const double t = std::exp(lt - ref);
        sum += t;
        if (t < 1e-17 * sum && j > mode + 5) break;
        if (j - mode > 100000) break;
    }
    for (long j = mode - 1; j >= 0; --j) {
        const double t = std::exp(log_term(j) - ref);
        sum += t;
        if (t < 1e-17 * sum) break;
    }
    return std::exp(ref) * sum;
}

}  // namespace

double norm_pdf(double x) noexcept { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

double norm_cdf(double x) noexcept { return 0.5 * std::erfc(-x * kInvSqrt2); }

double norm_sf(double x) noexcept { return 0.5 * std::erfc(x * kInvSqrt2); }

double log_norm_sf(double x) noexcept
{
    if (x > 30.0) return log_norm_sf_asymptotic(x);
    if (x < -5.0) return std::log1p(-norm_cdf(x));
    return std::log(norm_sf(x));
}

double log_norm_cdf(double x) noexcept { return log_norm_sf(-x); }

double nc_chisq1_cdf(double v, Noncentrality lambda)
{
    require_nonnegative(v, "nc_chisq1_cdf");
    return detail::cdf1_sqrt(std::sqrt(v), std::sqrt(lambda.value()));
}

double nc_chisq1_sf(double v, Noncentrality lambda)
{
    require_nonnegative(v, "nc_chisq1_sf");
    const double r = std::sqrt(v);
    const double s = std::sqrt(lambda.value());
    // 1 - G = Phi(s - r) + Q(s + r)
    return norm_cdf(s - r) + norm_sf(s + r);
}

double log_nc_chisq1_cdf(double v, Noncentrality lambda)
{
    require_nonnegative(v, "log_nc_chisq1_cdf");
    if (v == 0.0) return -std::numeric_limits<double>::infinity();
    const double r = std::sqrt(v);
    const double s = std::sqrt(lambda.value());
    const double g = detail::cdf1_sqrt(r, s);
    if (g > 1e-280) return std::log(g);
    // G = Q(s - r) (1 - Q(s + r) / Q(s - r)), both tails in log space.
    const double a = log_norm_sf(s - r);
    const double b = log_norm_sf(s + r);
    return a + std::log1p(-std::exp(b - a));
}

double nc_chisq_pdf(double v, Noncentrality lambda, ChiSqDof kappa)
{
    require_nonnegative(v, "nc_chisq_pdf");
    const int k = kappa.value();
    const double s = std::sqrt(lambda.value());
    if (v == 0.0) {
        if (k == 1) return std::numeric_limits<double>::infinity();
        if (k == 2) return 0.5 * std::exp(-0.5 * lambda.value());
        return 0.0;
    }
    const double r = std::sqrt(v);
    if (k == 1) return (norm_pdf(r - s) + norm_pdf(r + s)) / (2.0 * r);
    if (k == 3) {
        if (s == 0.0) return r * norm_pdf(r);
        return -norm_pdf(r - s) * std::expm1(-2.0 * r * s) / (2.0 * s);
    }
    return poisson_mixture_pdf(v, lambda.value(), k);
}

double nc_chisq1_pdf_dlambda(double v, Noncentrality lambda)
{
    if (!(v > 0.0)) throw std::domain_error("nc_chisq1_pdf_dlambda: v must be > 0");
    return 0.5 * (nc_chisq_pdf(v, lambda, 3) - nc_chisq_pdf(v, lambda, 1));
}

double chisq1_quantile(double p)
{
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("chisq1_quantile: p must lie in (0, 1)");
    // Work in r = sqrt(v): G(r^2) = erf(r / sqrt 2), dG/dr = 2 phi(r).
    auto fdf = [p](double r) {
        return std::pair{std::erf(r * kInvSqrt2) - p, 2.0 * norm_pdf(r)};
    };
    double hi = 10.0;  // v = 100
    while (std::erf(hi * kInvSqrt2) - p <= 0.0) hi *= 2.0;
    const double r = hybrid_newton(fdf, 0.0, hi, 1e-16);
    return r * r;
}

double chisq1_critical(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("chisq1_critical: alpha must lie in (0, 1)");
    // Solve log(2 Q(r)) = log(alpha); decreasing in r.
    const double target = std::log(alpha);
    auto fdf = [target](double r) {
        const double lq = std::log(2.0) + log_norm_sf(r);
        // d/dr log(2Q) = -phi(r) / Q(r)
        const double d = -std::exp(-0.5 * r * r - kLogSqrt2Pi - log_norm_sf(r));
        return std::pair{lq - target, d};
    };
    double hi = 10.0;
    while (std::log(2.0) + log_norm_sf(hi) - target >= 0.0) hi *= 2.0;
    const double r = hybrid_newton(fdf, 0.0, hi, 1e-16);
    return r * r;
}

}  // namespace medtest
