#pragma once

// Bracketing root finders shared by the quantile, calibration and bound code.

#include <cmath>
#include <stdexcept>
#include <string>

namespace medtest {

class NonConvergence : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Plain bisection on a sign change of f over [lo, hi]. Returns the midpoint of
/// the final bracket once hi - lo <= tol.
template <class F>
double bisect(F&& f, double lo, double hi, double tol, int max_iter = 400)
{
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        throw std::domain_error("bisect: no sign change on [" + std::to_string(lo) + ", " +
                                std::to_string(hi) + "]");
    for (int it = 0; it < max_iter && hi - lo > tol; ++it) {
        double mid = 0.5 * (lo + hi);
        double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

/// Newton steps safeguarded by a bracket; falls back to bisection whenever the
/// Newton iterate leaves the bracket. `fdf(x)` returns {f(x), f'(x)}; x_tol is
/// relative to 1 + |x|.
template <class FDF>
double hybrid_newton(FDF&& fdf, double lo, double hi, double x_tol, int max_iter = 200)
{
    auto [flo, dlo] = fdf(lo);
    auto [fhi, dhi] = fdf(hi);
    (void)dlo;
    (void)dhi;
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) throw std::domain_error("hybrid_newton: no sign change");
    const bool increasing = flo < 0.0;
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        auto [fx, dfx] = fdf(x);
        if (fx == 0.0) return x;
        if ((fx < 0.0) == increasing)
            lo = x;
        else
            hi = x;
        double next = (dfx != 0.0 && std::isfinite(dfx)) ? x - fx / dfx : lo - 1.0;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double scale = 1.0 + std::fabs(x);
        if (std::fabs(next - x) <= x_tol * scale || hi - lo <= x_tol * scale) return next;
        x = next;
    }
    throw NonConvergence("hybrid_newton: iteration limit reached");
}

}  // namespace medtest
