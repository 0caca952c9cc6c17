#pragma once

// Calibration of the augmentation slope: b(lambda) roots, the optimal b(alpha)
// for the simply-augmented test, b-bar(alpha) for the truncated test, and
// whole critical tables.

#include <iosfwd>
#include <vector>

#include "medtest/test_rules.hpp"

namespace medtest {

struct CalibrationConfig {
    double epsilon = 1e-9;
    /// Strictly increasing lambda grid scanned for sign changes of dD/dlambda.
    std::vector<double> lambda_grid = default_lambda_grid();
    double delta_init = 1e-4;
    double delta_shrink = 10.0;
    int max_refinements = 8;
    double root_tolerance = 1e-10;
    /// Worker threads for generate_table; 0 picks the hardware concurrency.
    unsigned workers = 0;
    bool keep_trace = false;

    /// {0.0001:0.01:5} u {5.2:0.2:30} u {31:1:150}, extended log-spaced to 1e4.
    static std::vector<double> default_lambda_grid();
    /// Profile with epsilon = 1e-16.
    static CalibrationConfig strict();
};

struct StationaryPoint {
    double lambda;
    double d;
    bool maximum;
};

struct TraceStep {
    double b;
    bool feasible;
    std::vector<StationaryPoint> roots;
};

struct CalibrationResult {
    double alpha = 0.0;
    double b_opt = 0.0;
    /// Stationary points of D(b_opt, .) in decreasing lambda.
    std::vector<StationaryPoint> roots;
    int iterations = 0;
    long evaluations = 0;
    std::vector<TraceStep> trace;
};

/// The b in [0, 1] with D(b, lambda) = 0; alpha < 1/2.
double b_of_lambda(double alpha, double lambda);

/// Stationary points of lambda -> D(b, lambda) on the config grid, bisected to
/// root_tolerance, in decreasing lambda.
std::vector<StationaryPoint> discrepancy_stationary_points(double alpha, double b,
                                                           const CalibrationConfig& cfg,
                                                           long* evaluations = nullptr);

/// Smallest b (to delta_init / delta_shrink^max_refinements) whose discrepancy
/// stays below epsilon at the largest maximum and below -epsilon at any
/// smaller maximum.
CalibrationResult optimal_b(double alpha, const CalibrationConfig& cfg = {});

/// b-bar with max over lambda of the truncated discrepancy equal to zero;
/// zero for alpha >= 1/2. roots holds the maximizing stationary point.
CalibrationResult optimal_b_truncated(double alpha, const CalibrationConfig& cfg = {});

/// Table rows for the given interior levels plus alpha = 0 and alpha = 1.
CriticalTable generate_table(const std::vector<double>& levels, const CalibrationConfig& cfg = {});

/// 0.01, 0.02, ..., 0.99.
std::vector<double> percentile_levels();

/// One line per b step: b, feasible, then lambda:D pairs.
void write_trace_tsv(std::ostream& os, const CalibrationResult& result);

}  // namespace medtest
