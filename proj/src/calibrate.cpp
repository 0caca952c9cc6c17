#include "medtest/calibrate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "medtest/roots.hpp"
#include "medtest/size_power.hpp"

namespace medtest {

namespace {

using ScaledFn = std::function<ScaledValue(double)>;

void check_config(const CalibrationConfig& cfg)
{
    if (!(cfg.epsilon > 0.0)) throw std::invalid_argument("epsilon must be > 0");
    if (cfg.lambda_grid.size() < 2) throw std::invalid_argument("lambda grid needs >= 2 points");
    for (std::size_t i = 1; i < cfg.lambda_grid.size(); ++i)
        if (!(cfg.lambda_grid[i] > cfg.lambda_grid[i - 1]))
            throw std::invalid_argument("lambda grid must be strictly increasing");
    if (!(cfg.lambda_grid.front() >= 0.0)) throw std::invalid_argument("lambda grid must be >= 0");
    if (!(cfg.delta_init > 0.0 && cfg.delta_init < 1.0))
        throw std::invalid_argument("delta_init must lie in (0, 1)");
    if (!(cfg.delta_shrink > 1.0)) throw std::invalid_argument("delta_shrink must be > 1");
    if (cfg.max_refinements < 0) throw std::invalid_argument("max_refinements must be >= 0");
}

// Sign changes of the derivative on the grid, each bisected; values of the
// function itself at every root. Decreasing lambda order.
std::vector<StationaryPoint> stationary_points(const ScaledFn& value, const ScaledFn& slope,
                                               const CalibrationConfig& cfg, long& evaluations)
{
    const auto& grid = cfg.lambda_grid;
    std::vector<double> sign(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) sign[i] = slope(grid[i]).mantissa;
    evaluations += static_cast<long>(grid.size());
    std::vector<StationaryPoint> out;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        const double a = sign[i - 1];
        const double b = sign[i];
        if (a == 0.0 || (a < 0.0) == (b < 0.0)) continue;
        if (b == 0.0 && i + 1 < grid.size()) continue;
        const double root = bisect(
            [&](double l) {
                ++evaluations;
                return slope(l).mantissa;
            },
            grid[i - 1], grid[i], cfg.root_tolerance);
        ++evaluations;
        out.push_back({root, value(root).value(), a > 0.0});
    }
    std::reverse(out.begin(), out.end());
    return out;
}

struct Feasibility {
    bool ok;
    std::vector<StationaryPoint> roots;
};

Feasibility check_b(double alpha, double b, const CalibrationConfig& cfg, long& evaluations)
{
    auto value = [&](double l) { return discrepancy_scaled(alpha, b, l); };
    auto slope = [&](double l) { return discrepancy_dlambda_scaled(alpha, b, l); };
    Feasibility f{true, stationary_points(value, slope, cfg, evaluations)};
    // Largest maximum must stay below epsilon, any smaller one below -epsilon.
    bool first_max = true;
    for (const auto& p : f.roots) {
        if (!p.maximum) continue;
        const ScaledValue d = value(p.lambda);
        ++evaluations;
        const bool pass = first_max ? d.at_most(cfg.epsilon) : d.at_most(-cfg.epsilon);
        first_max = false;
        if (!pass) f.ok = false;
    }
    // Boundary maxima at either end of the grid.
    if (slope(cfg.lambda_grid.front()).mantissa < 0.0 || f.roots.empty())
        if (!value(0.0).at_most(cfg.epsilon)) f.ok = false;
    if (slope(cfg.lambda_grid.back()).mantissa > 0.0)
        if (!value(cfg.lambda_grid.back()).at_most(cfg.epsilon)) f.ok = false;
    evaluations += 4;
    return f;
}

}  // namespace

std::vector<double> CalibrationConfig::default_lambda_grid()
{
    std::vector<double> g;
    for (int i = 0; i <= 499; ++i) g.push_back(0.0001 + 0.01 * i);
    for (int i = 0; i <= 124; ++i) g.push_back(5.2 + 0.2 * i);
    for (int i = 31; i <= 150; ++i) g.push_back(static_cast<double>(i));
    // Roots of the largest maximum move far out for small alpha.
    const int extra = 200;
    const double lo = std::log(150.0);
    const double hi = std::log(1e4);
    for (int i = 1; i <= extra; ++i) g.push_back(std::exp(lo + (hi - lo) * i / extra));
    return g;
}

CalibrationConfig CalibrationConfig::strict()
{
    CalibrationConfig cfg;
    cfg.epsilon = 1e-16;
    return cfg;
}

double b_of_lambda(double alpha, double lambda)
{
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::domain_error("b_of_lambda: requires 0 < alpha < 1/2");
    Noncentrality l(lambda);
    // D(0) = 1 - alpha > 0 and D(1) = -alpha G < 0.
    return bisect([&](double b) { return discrepancy(alpha, b, l); }, 0.0, 1.0, 1e-14);
}

std::vector<StationaryPoint> discrepancy_stationary_points(double alpha, double b,
                                                           const CalibrationConfig& cfg,
                                                           long* evaluations)
{
    check_config(cfg);
    long count = 0;
    auto value = [&](double l) { return discrepancy_scaled(alpha, b, l); };
    auto slope = [&](double l) { return discrepancy_dlambda_scaled(alpha, b, l); };
    auto out = stationary_points(value, slope, cfg, count);
    if (evaluations) *evaluations += count;
    return out;
}

CalibrationResult optimal_b(double alpha, const CalibrationConfig& cfg)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("optimal_b: alpha must lie in (0, 1)");
    check_config(cfg);
    CalibrationResult res;
    res.alpha = alpha;
    auto feasible = [&](double b) {
        ++res.iterations;
        Feasibility f = check_b(alpha, b, cfg, res.evaluations);
        if (cfg.keep_trace) res.trace.push_back({b, f.ok, f.roots});
        return f.ok;
    };
    if (!feasible(1.0)) throw NonConvergence("optimal_b: b = 1 violates the size constraint");

    // Coarse level: largest k with b = 1 - k delta feasible, by bisection on k.
    const double delta0 = cfg.delta_init;
    const long kmax = static_cast<long>(std::floor(1.0 / delta0 + 1e-9));
    auto b_at = [&](long k) { return std::max(0.0, 1.0 - static_cast<double>(k) * delta0); };
    long good = 0;
    long bad = kmax + 1;
    if (feasible(b_at(kmax))) good = kmax;
    while (bad - good > 1 && good != kmax) {
        const long mid = good + (bad - good) / 2;
        if (feasible(b_at(mid)))
            good = mid;
        else
            bad = mid;
    }
    double b = b_at(good);

    // Digit-by-digit descent: step down while the smaller b stays feasible.
    double delta = delta0;
    for (int r = 0; r < cfg.max_refinements; ++r) {
        delta /= cfg.delta_shrink;
        const int max_steps = static_cast<int>(std::ceil(cfg.delta_shrink)) + 1;
        int steps = 0;
        while (b - delta >= 0.0 && feasible(b - delta)) {
            b -= delta;
            if (++steps > max_steps)
                throw NonConvergence("optimal_b: descent did not settle at refinement " +
                                     std::to_string(r + 1));
        }
    }
    res.b_opt = b;
    res.roots = check_b(alpha, b, cfg, res.evaluations).roots;
    return res;
}

CalibrationResult optimal_b_truncated(double alpha, const CalibrationConfig& cfg)
{
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("optimal_b_truncated: alpha must lie in (0, 1)");
    check_config(cfg);
    CalibrationResult res;
    res.alpha = alpha;
    if (alpha >= 0.5) return res;

    // Largest value over interior maxima and the lambda = 0 boundary.
    auto peak = [&](double b, StationaryPoint* where) {
        ++res.iterations;
        auto value = [&](double l) { return truncated_discrepancy_scaled(alpha, b, l); };
        auto slope = [&](double l) { return truncated_discrepancy_dlambda_scaled(alpha, b, l); };
        auto roots = stationary_points(value, slope, cfg, res.evaluations);
        StationaryPoint best{0.0, value(0.0).value(), true};
        for (const auto& p : roots)
            if (p.maximum && p.d > best.d) best = p;
        if (where) *where = best;
        if (cfg.keep_trace) res.trace.push_back({b, best.d <= 0.0, roots});
        return best.d;
    };
    double lo = 0.0;
    double hi = 1.0;
    if (!(peak(lo, nullptr) > 0.0) || !(peak(hi, nullptr) <= 0.0))
        throw NonConvergence("optimal_b_truncated: no sign change of the peak discrepancy");
    while (hi - lo > 1e-13) {
        const double mid = 0.5 * (lo + hi);
        if (peak(mid, nullptr) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    StationaryPoint at{};
    peak(hi, &at);
    res.b_opt = hi;
    res.roots = {at};
    return res;
}

std::vector<double> percentile_levels()
{
    std::vector<double> out;
    for (int i = 1; i <= 99; ++i) out.push_back(i / 100.0);
    return out;
}

CriticalTable generate_table(const std::vector<double>& levels, const CalibrationConfig& cfg)
{
    for (double a : levels)
        if (!(a > 0.0 && a < 1.0)) throw std::domain_error("table levels must lie in (0, 1)");
    std::vector<double> sorted = levels;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    std::vector<double> b(sorted.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < sorted.size();) {
            try {
                CalibrationConfig local = cfg;
                local.keep_trace = false;
                b[i] = optimal_b(sorted[i], local).b_opt;
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned workers = cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, sorted.size())));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    std::vector<CriticalPair> rows;
    rows.push_back({0.0, 1.0, std::numeric_limits<double>::infinity()});
    for (std::size_t i = 0; i < sorted.size(); ++i)
        rows.push_back({sorted[i], b[i], chisq1_critical(sorted[i])});
    rows.push_back({1.0, 0.0, 0.0});
    return CriticalTable(std::move(rows));
}

void write_trace_tsv(std::ostream& os, const CalibrationResult& result)
{
    char buf[64];
    os << "b\tfeasible\troots\n";
    for (const auto& step : result.trace) {
        std::snprintf(buf, sizeof buf, "%.17g", step.b);
        os << buf << '\t' << (step.feasible ? 1 : 0) << '\t';
        for (std::size_t i = 0; i < step.roots.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.10g:%.6e", step.roots[i].lambda, step.roots[i].d);
            os << (i ? " " : "") << buf;
        }
        os << '\n';
    }
}

}  // namespace medtest
