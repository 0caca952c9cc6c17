#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "medtest/dist_core.hpp"

using namespace medtest;
namespace bm = boost::math;

namespace {

double rel_err(double a, double b)
{
    if (a == b) return 0.0;
    return std::fabs(a - b) / std::max(std::fabs(a), std::fabs(b));
}

const std::vector<double> kV{1e-8, 1e-3, 0.05, 0.4549364, 1.0, 2.7055435, 3.8414588, 7.5, 20.0, 60.0};
const std::vector<double> kLambda{0.0, 1e-6, 0.1, 1.0, 3.845, 10.0, 33.64, 108.03};

}  // namespace

TEST_CASE("normal tails")
{
    const bm::normal n01;
    for (double x : {-30.0, -8.0, -1.5, 0.0, 0.3, 2.0, 6.0, 12.0, 37.0}) {
        // Rounding of x / sqrt(2) costs about x^2 ulps in the far tails.
        const double tol = 4e-16 * (4.0 + x * x);
        CHECK(rel_err(norm_cdf(x), bm::cdf(n01, x)) < tol);
        CHECK(rel_err(norm_sf(x), bm::cdf(bm::complement(n01, x))) < tol);
        CHECK(rel_err(norm_pdf(x), bm::pdf(n01, x)) < 1e-14);
    }
    CHECK(log_norm_sf(50.0) == doctest::Approx(-1250.0 - std::log(50.0) - kLogSqrt2Pi).epsilon(1e-6));
    CHECK(std::isfinite(log_norm_cdf(-60.0)));
}

TEST_CASE("noncentral chi-square(1) cdf and survival function")
{
    for (double lam : kLambda) {
        const bm::non_central_chi_squared law(1.0, lam);
        const bm::chi_squared central(1.0);
        for (double v : kV) {
            const double cdf = lam == 0.0 ? bm::cdf(central, v) : bm::cdf(law, v);
            const double sf = lam == 0.0 ? bm::cdf(bm::complement(central, v)) : bm::cdf(bm::complement(law, v));
            INFO("v=" << v << " lambda=" << lam);
            CHECK(std::fabs(nc_chisq1_cdf(v, lam) - cdf) < 1e-13);
            if (sf > 1e-200) CHECK(rel_err(nc_chisq1_sf(v, lam), sf) < 1e-9);
            if (cdf > 1e-300) CHECK(std::fabs(log_nc_chisq1_cdf(v, lam) - std::log(cdf)) < 1e-9);
        }
    }
    CHECK(nc_chisq1_cdf(0.0, 4.0) == 0.0);
    CHECK(nc_chisq1_sf(0.0, 4.0) == 1.0);
    // Deep lower tail: log cdf stays finite and ordered where the cdf underflows.
    CHECK(nc_chisq1_cdf(0.5, 5000.0) == 0.0);
    const double a = log_nc_chisq1_cdf(0.5, 5000.0);
    const double b = log_nc_chisq1_cdf(0.5, 6000.0);
    CHECK(std::isfinite(a));
    CHECK(b < a);
}

TEST_CASE("noncentral chi-square densities")
{
    for (int kappa : {1, 2, 3, 5}) {
        for (double lam : kLambda) {
            const bm::non_central_chi_squared law(kappa, lam);
            const bm::chi_squared central(kappa);
            for (double v : kV) {
                if (v < 1e-6 && kappa > 1) continue;
                const double ref = lam == 0.0 ? bm::pdf(central, v) : bm::pdf(law, v);
                INFO("kappa=" << kappa << " v=" << v << " lambda=" << lam);
                if (ref > 1e-250) CHECK(rel_err(nc_chisq_pdf(v, lam, kappa), ref) < 1e-9);
            }
        }
    }
    CHECK(std::isinf(nc_chisq_pdf(0.0, 1.0, 1)));
}

TEST_CASE("lambda derivative of the density matches finite differences")
{
    for (double lam : {0.5, 2.0, 9.0, 40.0}) {
        for (double v : {0.2, 1.0, 3.0, 12.0}) {
            const double h = 1e-5 * std::max(1.0, lam);
            const double fd = (bm::pdf(bm::non_central_chi_squared(1.0, lam + h), v) -
                               bm::pdf(bm::non_central_chi_squared(1.0, lam - h), v)) /
                              (2 * h);
            CHECK(nc_chisq1_pdf_dlambda(v, lam) == doctest::Approx(fd).epsilon(1e-6).scale(1e-12));
        }
    }
}

TEST_CASE("density integrates to the cdf")
{
    // Trapezoid in u = sqrt(v), where the kappa = 1 singularity disappears.
    const double lam = 2.5, top = 6.0;
    const int k = 20000;
    const double ut = std::sqrt(top);
    double sum = 0.0;
    for (int i = 0; i <= k; ++i) {
        const double u = ut * i / k;
        const double w = (i == 0 || i == k) ? 0.5 : 1.0;
        const double g = u == 0.0 ? 2.0 * norm_pdf(std::sqrt(lam)) : nc_chisq_pdf(u * u, lam, 1) * 2 * u;
        sum += w * g;
    }
    CHECK(sum * ut / k == doctest::Approx(nc_chisq1_cdf(top, lam)).epsilon(1e-7));
}

TEST_CASE("chi-square(1) quantiles")
{
    CHECK(std::fabs(chisq1_critical(0.05) - 3.8414588) < 5e-8);
    CHECK(std::fabs(chisq1_critical(0.01) - 6.6348966) < 5e-8);
    CHECK(std::fabs(chisq1_critical(0.10) - 2.7055435) < 5e-8);
    CHECK(std::fabs(chisq1_quantile(0.5) - 0.4549364) < 5e-8);
    const bm::chi_squared central(1.0);
    for (double p : {1e-12, 1e-6, 0.2, 0.77, 0.999}) {
        CHECK(rel_err(chisq1_quantile(p), bm::quantile(central, p)) < 1e-11);
        CHECK(rel_err(chisq1_critical(p), bm::quantile(bm::complement(central, p))) < 1e-11);
    }
    CHECK(chisq1_critical(1e-15) == doctest::Approx(bm::quantile(bm::complement(central, 1e-15))).epsilon(1e-11));
    CHECK_THROWS_AS(chisq1_critical(0.0), std::domain_error);
    CHECK_THROWS_AS(chisq1_critical(1.0), std::domain_error);
    CHECK_THROWS_AS(chisq1_quantile(1.5), std::domain_error);
}

TEST_CASE("argument validation")
{
    CHECK_THROWS_AS(Noncentrality(-1.0), std::domain_error);
    CHECK_THROWS_AS(Noncentrality(std::numeric_limits<double>::quiet_NaN()), std::domain_error);
    CHECK_THROWS_AS(ChiSqDof(0), std::domain_error);
}
