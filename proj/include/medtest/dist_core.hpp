#pragma once

// Scalar distribution kernel: standard normal and noncentral chi-square
// densities, distribution functions, lambda-derivatives and quantiles.

#include <cmath>
#include <limits>
#include <stdexcept>

namespace medtest {

/// Noncentrality parameter lambda = mu^2 of a noncentral chi-square law.
class Noncentrality {
public:
    Noncentrality(double lambda) : value_(lambda)  // NOLINT: implicit by intent
    {
        if (!(lambda >= 0.0) || !std::isfinite(lambda))
            throw std::domain_error("noncentrality must be finite and >= 0");
    }
    double value() const noexcept { return value_; }
    operator double() const noexcept { return value_; }

private:
    double value_;
};

/// Degrees of freedom of a chi-square law.
class ChiSqDof {
public:
    ChiSqDof(int kappa) : kappa_(kappa)  // NOLINT
    {
        if (kappa < 1) throw std::domain_error("degrees of freedom must be >= 1");
    }
    int value() const noexcept { return kappa_; }

private:
    int kappa_;
};

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736406;

// --- standard normal -------------------------------------------------------

double norm_pdf(double x) noexcept;
double norm_cdf(double x) noexcept;
/// Upper tail 1 - Phi(x), accurate far into the tail.
double norm_sf(double x) noexcept;
double log_norm_cdf(double x) noexcept;
double log_norm_sf(double x) noexcept;

// --- noncentral chi-square with one degree of freedom ----------------------

/// G(v; lambda) = Phi(sqrt(lambda) + sqrt(v)) - Phi(sqrt(lambda) - sqrt(v)).
double nc_chisq1_cdf(double v, Noncentrality lambda);
/// 1 - G(v; lambda) without cancellation.
double nc_chisq1_sf(double v, Noncentrality lambda);
/// log G(v; lambda); finite well past the point where G underflows.
double log_nc_chisq1_cdf(double v, Noncentrality lambda);

/// Density g_kappa(v; lambda). For kappa = 1 and v = 0 the density is
/// unbounded and +infinity is returned.
double nc_chisq_pdf(double v, Noncentrality lambda, ChiSqDof kappa);

/// d/dlambda g_1(v; lambda) = (g_3(v; lambda) - g_1(v; lambda)) / 2.
double nc_chisq1_pdf_dlambda(double v, Noncentrality lambda);

/// Central chi-square(1) quantile: the v with G(v) = p.
double chisq1_quantile(double p);
/// Upper critical value chi2_alpha with 1 - G(chi2_alpha) = alpha. Solved in
/// the survival function so small alpha keeps full relative accuracy.
double chisq1_critical(double alpha);

namespace detail {

// Unchecked kernels for quadrature inner loops. s = sqrt(lambda), r = sqrt(v).
inline double central_cdf(double v) noexcept
{
    return v <= 0.0 ? 0.0 : std::erf(std::sqrt(0.5 * v));
}

inline double cdf1_sqrt(double r, double s) noexcept
{
    // Q(s - r) - Q(s + r), with Q the upper normal tail.
    if (r <= 0.0) return 0.0;
    double lo = s - r;
    double hi = s + r;
    if (lo >= 0.0) return 0.5 * (std::erfc(lo * 0.70710678118654752440) -
                                 std::erfc(hi * 0.70710678118654752440));
    return 0.5 * (std::erf(hi * 0.70710678118654752440) -
                  std::erf(lo * 0.70710678118654752440));
}

}  // namespace detail

}  // namespace medtest
