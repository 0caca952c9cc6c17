#pragma once

// Monte Carlo rejection frequencies of the mediation tests under the linear
// and logit data-generating processes.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "medtest/estimate.hpp"

namespace medtest {

enum class Dgp { linear, logit };
enum class ErrorLaw { normal, student_t5, chisq3, lognormal };
enum class HeteroMap { unit, abs_x, exp_04x };
enum class XLaw { standard_normal, dichotomous_balanced };

const char* to_string(Dgp v) noexcept;
const char* to_string(ErrorLaw v) noexcept;
const char* to_string(HeteroMap v) noexcept;
const char* to_string(XLaw v) noexcept;
const char* to_string(SeMode v) noexcept;
Dgp parse_dgp(const std::string& s);
ErrorLaw parse_error_law(const std::string& s);
HeteroMap parse_hetero_map(const std::string& s);
XLaw parse_x_law(const std::string& s);
SeMode parse_se_mode(const std::string& s);

struct SimulationConfig {
    int n = 100;
    long reps = 10000;
    std::uint64_t seed = 20240501;
    Dgp dgp = Dgp::linear;
    ErrorLaw error_law = ErrorLaw::normal;
    HeteroMap hetero_map = HeteroMap::unit;
    XLaw x_law = XLaw::standard_normal;
    double theta1 = 0.0;
    double theta2 = 0.0;
    double tau = 0.0;
    SeMode se_mode = SeMode::ordinary;
    double alpha = 0.05;
    bool hc1 = false;
    unsigned workers = 1;

    void validate() const;
};

enum class TestKind { lr, wald, simply_augmented, truncated, exact };
inline constexpr int kTestKinds = 5;
const char* to_string(TestKind t) noexcept;

struct SimulationResult {
    SimulationConfig config;
    /// Replications that produced statistics.
    long valid = 0;
    /// Replications whose estimation failed (excluded from the denominators).
    long failed = 0;
    /// Rejection counts indexed by TestKind; exact is zero when alpha is not
    /// 1 / (r + 2).
    std::array<long, kTestKinds> rejections{};
    bool exact_defined = false;
    double elapsed_seconds = 0.0;

    double frequency(TestKind t) const;
    /// Binomial standard error sqrt(p (1 - p) / valid).
    double standard_error(TestKind t) const;
};

/// Independent stream for one replication.
std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication);

/// n standardized draws (mean 0, variance 1).
Eigen::VectorXd draw_errors(ErrorLaw law, int n, std::mt19937_64& stream);

/// theta2 giving noncentrality lambda2 for the second t-statistic with unit
/// variances: sqrt(lambda2 / (n - 2)), or sqrt(lambda2 (n - 2)) when literal.
double theta2_for_lambda(double lambda2, int n, bool literal = false);

/// One simulated sample.
Dataset simulate_dataset(const SimulationConfig& cfg, std::mt19937_64& stream);

SimulationResult run_campaign(const SimulationConfig& cfg, const CriticalTable& table);

/// Grid of configurations sharing one seed.
struct CampaignSpec {
    SimulationConfig base;
    std::vector<int> n;
    std::vector<ErrorLaw> error_laws;
    std::vector<HeteroMap> hetero_maps;
    std::vector<SeMode> se_modes;
    std::vector<double> theta2;
    /// Used instead of theta2 when non-empty (mapped by theta2_for_lambda).
    std::vector<double> lambda2;
    bool literal_lambda_map = false;
};

/// JSON object or key=value lines; list values are comma separated.
CampaignSpec parse_campaign(const std::string& text);

struct CampaignRow {
    SimulationResult result;
    double lambda2;  // NaN when the grid is given in theta2
};

std::vector<CampaignRow> run_campaign_grid(const CampaignSpec& spec, const CriticalTable& table);

/// One row per (test, theta2, n, law, hetero, se_mode).
void write_campaign_csv(std::ostream& os, const std::vector<CampaignRow>& rows);

}  // namespace medtest
