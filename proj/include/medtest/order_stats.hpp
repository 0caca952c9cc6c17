#pragma once

// Distribution of the ordered squared t-statistics (v1, v2) = (f(1), f(2)) and
// probabilities of sub-regions of the octant 0 <= v1 <= v2.

#include <functional>

#include "medtest/dist_core.hpp"
#include "medtest/quadrature.hpp"

namespace medtest {

/// Sample point on the octant V = {0 <= v1 <= v2 < inf}.
class OrderedPair {
public:
    OrderedPair(double v1, double v2);
    /// Sorts two squared statistics into order.
    static OrderedPair from_unordered(double f1, double f2);
    /// Squares and sorts two t-statistics.
    static OrderedPair from_t(double t1, double t2);

    double v1() const noexcept { return v1_; }
    double v2() const noexcept { return v2_; }

private:
    double v1_;
    double v2_;
};

struct NoncentralityPair {
    Noncentrality lambda1;
    Noncentrality lambda2;

    /// Null configuration (0, lambda).
    static NoncentralityPair null(Noncentrality lambda) { return {0.0, lambda}; }
};

struct RegionProbs {
    double p_a1;
    double p_a2;
    double p_a3;
};

double joint_pdf(const OrderedPair& pt, const NoncentralityPair& nc);
double null_joint_pdf(const OrderedPair& pt, Noncentrality lambda);

/// Marginal CDF of v1: H = G(v; l1) + G(v; l2) - G(v; l1) G(v; l2).
double marginal_v1_cdf(double v, const NoncentralityPair& nc);
/// Marginal density of v1: g(v; l1)[1 - G(v; l2)] + g(v; l2)[1 - G(v; l1)].
double marginal_v1_pdf(double v, const NoncentralityPair& nc);

/// Null probabilities of A1 = {v2 > z, z < v1}, A2 = {v2 > z, v1 < z} and
/// A3 = {v2 < z} for threshold z.
RegionProbs region_probs(double z, Noncentrality lambda);

/// Probability of {a < v2 < b, lo(v2) < v1 < hi(v2)} (clipped to v1 <= v2).
/// The inner v1 integral is done in closed form through the CDF; the outer one
/// by quadrature in u = sqrt(v2), which removes the v^{-1/2} singularity.
double prob_v2_simple(const NoncentralityPair& nc, double a, double b,
                      const std::function<double(double)>& lo,
                      const std::function<double(double)>& hi,
                      const quad::Tolerance& tol = {});

/// Probability of {v1 > a, lo(v1) < v2 < inf} with lo(v1) >= v1.
double prob_v1_simple_upper(const NoncentralityPair& nc, double a,
                            const std::function<double(double)>& lo,
                            const quad::Tolerance& tol = {});

}  // namespace medtest
