#pragma once

// Mediation regressions m = theta1 x + u1 and y = tau x + theta2 m + u2 (or a
// logit outcome), ordinary and sandwich t-statistics, and the assembled report.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medtest/test_rules.hpp"

namespace medtest {

class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Dataset {
    Eigen::VectorXd y;
    Eigen::VectorXd x;
    Eigen::VectorXd m;
    /// n x k; zero columns when there are no controls.
    Eigen::MatrixXd controls;
    std::vector<std::string> control_names;
    /// Columns already projected out of y, x and m (counts the intercept).
    int partialled = 0;

    Eigen::Index n() const { return x.size(); }
    void validate() const;

    /// Copy with a leading column of ones among the controls.
    Dataset with_intercept() const;
};

struct CsvColumns {
    std::string y;
    std::string x;
    std::string m;
    std::vector<std::string> controls;
};

/// Reads a headed CSV; missing or non-numeric cells are rejected.
Dataset read_dataset_csv(std::istream& is, const CsvColumns& cols);

enum class SeMode { ordinary, robust };
enum class OutcomeModel { linear, logit_outcome };

struct RegressionFit {
    double theta1_hat = 0.0;
    double tau_hat = 0.0;
    double theta2_hat = 0.0;
    double s11 = 0.0;
    double s22 = 0.0;
    double s_xx = 0.0;
    /// Standard errors of (theta1, tau, theta2).
    Eigen::Vector3d se_ordinary = Eigen::Vector3d::Zero();
    Eigen::Vector3d se_robust = Eigen::Vector3d::Zero();
    double t1 = 0.0;
    double t2 = 0.0;
    Eigen::VectorXd resid1;
    Eigen::VectorXd resid2;
    int iterations = 0;
};

/// Projects y, x and m onto the orthogonal complement of the controls; the
/// result carries no controls.
Dataset residualize(const Dataset& data);

/// OLS of both equations on (residualized) data; t1, t2 are ordinary.
RegressionFit fit_linear(const Dataset& data);

/// Sandwich t-ratios (HC0, or HC1 when requested) for theta1 and theta2.
std::pair<double, double> robust_t(const Dataset& data, const RegressionFit& fit, bool hc1 = false);

/// m on [1, x, controls] by OLS; y on [1, x, m, controls] by logit ML. t2 is
/// the z-statistic from the inverse observed information, or the sandwich
/// when robust is set.
RegressionFit fit_logit_outcome(const Dataset& data, bool robust = false, bool hc1 = false);

struct MediationOptions {
    SeMode se_mode = SeMode::robust;
    OutcomeModel model = OutcomeModel::linear;
    double alpha = 0.05;
    bool hc1 = false;
    /// Adds an intercept to both equations before fitting.
    bool intercept = true;
};

/// The t-statistic pair used by the tests.
std::pair<double, double> mediation_t(const Dataset& data, const MediationOptions& opts);

TestReport run_mediation_test(const Dataset& data, const MediationOptions& opts,
                              const CriticalTable& table);

}  // namespace medtest
