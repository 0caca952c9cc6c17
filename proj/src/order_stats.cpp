#include "medtest/order_stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace medtest {

OrderedPair::OrderedPair(double v1, double v2) : v1_(v1), v2_(v2)
{
    if (!(v1 >= 0.0) || !(v2 >= v1) || !std::isfinite(v2))
        throw std::domain_error("OrderedPair requires 0 <= v1 <= v2 < inf");
}

OrderedPair OrderedPair::from_unordered(double f1, double f2)
{
    if (!(f1 >= 0.0) || !(f2 >= 0.0))
        throw std::domain_error("squared statistics must be >= 0");
    return OrderedPair(std::min(f1, f2), std::max(f1, f2));
}

OrderedPair OrderedPair::from_t(double t1, double t2)
{
    if (!std::isfinite(t1) || !std::isfinite(t2))
        throw std::domain_error("t-statistics must be finite");
    return from_unordered(t1 * t1, t2 * t2);
}

double joint_pdf(const OrderedPair& pt, const NoncentralityPair& nc)
{
    const double a = nc_chisq_pdf(pt.v1(), nc.lambda1, 1) * nc_chisq_pdf(pt.v2(), nc.lambda2, 1);
    const double b = nc_chisq_pdf(pt.v2(), nc.lambda1, 1) * nc_chisq_pdf(pt.v1(), nc.lambda2, 1);
    return a + b;
}

double null_joint_pdf(const OrderedPair& pt, Noncentrality lambda)
{
    return joint_pdf(pt, NoncentralityPair::null(lambda));
}

double marginal_v1_cdf(double v, const NoncentralityPair& nc)
{
    if (!(v >= 0.0)) throw std::domain_error("marginal_v1_cdf: v must be >= 0");
    // 1 - H = (1 - G1)(1 - G2), computed through the survival functions.
    return 1.0 - nc_chisq1_sf(v, nc.lambda1) * nc_chisq1_sf(v, nc.lambda2);
}

double marginal_v1_pdf(double v, const NoncentralityPair& nc)
{
    return nc_chisq_pdf(v, nc.lambda1, 1) * nc_chisq1_sf(v, nc.lambda2) +
           nc_chisq_pdf(v, nc.lambda2, 1) * nc_chisq1_sf(v, nc.lambda1);
}

RegionProbs region_probs(double z, Noncentrality lambda)
{
    if (!(z > 0.0)) throw std::domain_error("region_probs: z must be > 0");
    const double g0 = nc_chisq1_cdf(z, 0.0);
    const double gl = nc_chisq1_cdf(z, lambda);
    const double s0 = nc_chisq1_sf(z, 0.0);
    const double sl = nc_chisq1_sf(z, lambda);
    RegionProbs p;
    p.p_a1 = s0 * sl;
    p.p_a3 = g0 * gl;
    p.p_a2 = g0 * sl + s0 * gl;
    return p;
}

double prob_v2_simple(const NoncentralityPair& nc, double a, double b,
                      const std::function<double(double)>& lo,
                      const std::function<double(double)>& hi, const quad::Tolerance& tol)
{
    if (!(a >= 0.0) || !(b >= a)) throw std::domain_error("prob_v2_simple: need 0 <= a <= b");
    const double s1 = std::sqrt(nc.lambda1.value());
    const double s2 = std::sqrt(nc.lambda2.value());
    // v2 = u^2: g(u^2; l) 2u = phi(u - s) + phi(u + s).
    auto f = [&](double u) {
        const double v2 = u * u;
        const double l = std::max(0.0, lo(v2));
        const double h = std::min(v2, hi(v2));
        if (!(h > l)) return 0.0;
        const double rl = std::sqrt(l);
        const double rh = std::sqrt(h);
        const double w1 = norm_pdf(u - s1) + norm_pdf(u + s1);
        const double w2 = norm_pdf(u - s2) + norm_pdf(u + s2);
        const double d1 = detail::cdf1_sqrt(rh, s1) - detail::cdf1_sqrt(rl, s1);
        const double d2 = detail::cdf1_sqrt(rh, s2) - detail::cdf1_sqrt(rl, s2);
        return w2 * d1 + w1 * d2;
    };
    if (std::isinf(b)) {
        auto r = quad::integrate_to_infinity(f, std::sqrt(a), tol);
        return r.value;
    }
    return quad::integrate(f, std::sqrt(a), std::sqrt(b), tol).value;
}

double prob_v1_simple_upper(const NoncentralityPair& nc, double a,
                            const std::function<double(double)>& lo, const quad::Tolerance& tol)
{
    if (!(a >= 0.0)) throw std::domain_error("prob_v1_simple_upper: need a >= 0");
    const double s1 = std::sqrt(nc.lambda1.value());
    const double s2 = std::sqrt(nc.lambda2.value());
    auto f = [&](double u) {
        const double v1 = u * u;
        const double l = std::max(v1, lo(v1));
        const double w1 = norm_pdf(u - s1) + norm_pdf(u + s1);
        const double w2 = norm_pdf(u - s2) + norm_pdf(u + s2);
        return w1 * nc_chisq1_sf(l, nc.lambda2) + w2 * nc_chisq1_sf(l, nc.lambda1);
    };
    return quad::integrate_to_infinity(f, std::sqrt(a), tol).value;
}

}  // namespace medtest
