#pragma once

// Decision rules for the LR, Wald, simply-augmented LR(b), truncated and exact
// tests, the exact-test knot construction, p-values and coherence checks.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "medtest/order_stats.hpp"

namespace medtest {

struct CriticalPair {
    double alpha;
    double b;
    /// chi2_alpha; +inf at alpha = 0.
    double chi2;
};

/// Calibrated rows sorted by alpha. Immutable once built.
class CriticalTable {
public:
    explicit CriticalTable(std::vector<CriticalPair> rows);

    const std::vector<CriticalPair>& rows() const noexcept { return rows_; }
    std::size_t size() const noexcept { return rows_.size(); }
    const CriticalPair& operator[](std::size_t i) const { return rows_[i]; }

    /// Row with the given level, if present (exact match up to 1e-12).
    std::optional<CriticalPair> find(double alpha) const;
    /// Row for level alpha; levels off the grid get b by linear interpolation
    /// and an exact chi2.
    CriticalPair at(double alpha) const;
    /// Inverse of the b column: the level whose b equals ratio.
    double alpha_for_ratio(double ratio) const;

    void write_csv(std::ostream& os) const;
    static CriticalTable read_csv(std::istream& is);
    std::string to_json() const;
    static CriticalTable from_json(const std::string& text);

private:
    std::vector<CriticalPair> rows_;
};

struct ExactTestSpec {
    int r;
    double alpha;
    /// z_1 < ... < z_{r+1}; z_{r+1} = chi2_alpha.
    std::vector<double> knots;
};

enum class RejectionCause { none, lr_boundary, ratio_boundary };

const char* to_string(RejectionCause cause) noexcept;

struct AugmentedDecision {
    bool reject;
    RejectionCause cause;
};

double lr_statistic(double f1, double f2);
double wald_statistic(double v1, double v2);

bool decide_lr(const OrderedPair& pt, double alpha);
bool decide_wald(const OrderedPair& pt, double alpha);
AugmentedDecision decide_simply_augmented(const OrderedPair& pt, const CriticalPair& cp);
bool decide_truncated(const OrderedPair& pt, double alpha, double b_bar);

ExactTestSpec build_exact_spec(int r);
bool decide_exact(const OrderedPair& pt, const ExactTestSpec& spec);

/// Smallest tabled level at which LR(b) rejects, interpolated linearly.
double p_value(const OrderedPair& pt, const CriticalTable& table);

struct CoherenceViolation {
    OrderedPair point;
    double alpha_low;
    double alpha_high;
};

/// Points rejected at some level but accepted at a larger one, for the
/// simply-augmented family defined by the table.
std::vector<CoherenceViolation> coherence_scan(const CriticalTable& table,
                                               const std::vector<OrderedPair>& points);

/// Same check for an arbitrary family of tests given as (level, decision).
struct LeveledRule {
    double alpha;
    std::function<bool(const OrderedPair&)> reject;
};
std::vector<CoherenceViolation> coherence_scan(std::vector<LeveledRule> rules,
                                               const std::vector<OrderedPair>& points);

struct TestDecisions {
    bool lr = false;
    bool wald = false;
    bool simply_augmented = false;
    bool truncated = false;
    /// Only defined when alpha = 1 / (r + 2) for an integer r >= 0.
    std::optional<bool> exact;
};

struct TestReport {
    double t1 = 0.0;
    double t2 = 0.0;
    /// Squared statistics in input order.
    double f1 = 0.0;
    double f2 = 0.0;
    OrderedPair point{0.0, 0.0};
    double lr_stat = 0.0;
    double wald_stat = 0.0;
    double alpha = 0.05;
    TestDecisions decisions;
    RejectionCause cause = RejectionCause::none;
    double p_value = 1.0;
};

/// Runs every test on a pair of t-statistics. b_bar is the truncated-test
/// slope at alpha.
TestReport evaluate_tests(double t1, double t2, double alpha, const CriticalTable& table,
                          double b_bar);

/// r with alpha = 1 / (r + 2), if alpha has that form.
std::optional<int> exact_r_for_alpha(double alpha);

std::string to_json(const TestReport& report);

}  // namespace medtest
