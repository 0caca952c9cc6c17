#pragma once

// Globally adaptive Gauss-Kronrod (10/21) quadrature shared by every module
// that integrates over sub-regions of the (v1, v2) octant.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

namespace medtest::quad {

struct Tolerance {
    double abs = 1e-11;
    double rel = 1e-9;
    int max_subdivisions = 200;
};

struct Result {
    double value = 0.0;
    double abs_error = 0.0;
    /// Integral of |f|; the scale against which `rel` is judged.
    double abs_value = 0.0;
    int evaluations = 0;
};

namespace detail {

// Kronrod nodes on [-1, 1] (non-negative half); odd indices are Gauss nodes.
inline constexpr std::array<double, 11> kNodes = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.000000000000000000000000000000000};

inline constexpr std::array<double, 11> kKronrodWeights = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600525478314, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};

inline constexpr std::array<double, 5> kGaussWeights = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

struct Panel {
    double a, b, value, error, abs_value;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gk21(F& f, double a, double b)
{
    const double center = 0.5 * (a + b);
    const double half = 0.5 * (b - a);
    const double fc = f(center);
    double kronrod = fc * kKronrodWeights[10];
    double gauss = 0.0;
    double absk = std::fabs(fc) * kKronrodWeights[10];
    for (int j = 0; j < 10; ++j) {
        const double dx = half * kNodes[j];
        const double f1 = f(center - dx);
        const double f2 = f(center + dx);
        kronrod += kKronrodWeights[j] * (f1 + f2);
        absk += kKronrodWeights[j] * (std::fabs(f1) + std::fabs(f2));
        if (j % 2 == 1) gauss += kGaussWeights[j / 2] * (f1 + f2);
    }
    Panel p;
    p.a = a;
    p.b = b;
    p.value = kronrod * half;
    p.abs_value = absk * std::fabs(half);
    p.error = std::fabs((kronrod - gauss) * half);
    return p;
}

}  // namespace detail

/// Integrate f over [a, b]. Integrands are expected to be finite on the open
/// interval; endpoints are never evaluated.
template <class F>
Result integrate(F&& f, double a, double b, const Tolerance& tol = {})
{
    Result out;
    if (a == b) return out;
    std::priority_queue<detail::Panel> heap;
    heap.push(detail::gk21(f, a, b));
    out.evaluations = 21;
    double value = heap.top().value;
    double error = heap.top().error;
    double abs_value = heap.top().abs_value;
    int subdivisions = 0;
    while (error > std::max(tol.abs, tol.rel * abs_value) && subdivisions < tol.max_subdivisions) {
        detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.push(worst);
            break;
        }
        detail::Panel left = detail::gk21(f, worst.a, mid);
        detail::Panel right = detail::gk21(f, mid, worst.b);
        out.evaluations += 42;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        abs_value += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(left);
        heap.push(right);
        ++subdivisions;
    }
    // Re-sum to shed the drift of the running updates.
    value = 0.0;
    error = 0.0;
    abs_value = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        error += heap.top().error;
        abs_value += heap.top().abs_value;
        heap.pop();
    }
    out.value = value;
    out.abs_error = error;
    out.abs_value = abs_value;
    return out;
}

/// Integrate f over [a, inf) through v = a + t / (1 - t).
template <class F>
Result integrate_to_infinity(F&& f, double a, const Tolerance& tol = {})
{
    auto mapped = [&](double t) {
        const double one_minus = 1.0 - t;
        const double v = a + t / one_minus;
        const double jac = 1.0 / (one_minus * one_minus);
        const double fv = f(v);
        return fv == 0.0 ? 0.0 : fv * jac;
    };
    return integrate(mapped, 0.0, 1.0, tol);
}

/// Nested adaptive quadrature over {a < x < b, lo(x) < y < hi(x)}.
template <class F, class Lo, class Hi>
Result integrate_2d(F&& f, double a, double b, Lo&& lo, Hi&& hi, const Tolerance& tol = {})
{
    Tolerance inner = tol;
    inner.abs = tol.abs * 1e-2;
    inner.rel = tol.rel * 1e-2;
    int evaluations = 0;
    auto outer = [&](double x) {
        const double y0 = lo(x);
        const double y1 = hi(x);
        if (!(y1 > y0)) return 0.0;
        auto g = [&](double y) { return f(x, y); };
        Result r = integrate(g, y0, y1, inner);
        evaluations += r.evaluations;
        return r.value;
    };
    Result r = integrate(outer, a, b, tol);
    r.evaluations += evaluations;
    return r;
}

}  // namespace medtest::quad
