#include "medtest/simulate.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "medtest/tables.hpp"

namespace medtest {

namespace {

template <class E, std::size_t N>
E parse_enum(const std::string& s, const std::array<std::pair<const char*, E>, N>& names,
             const char* what)
{
    for (const auto& [name, value] : names)
        if (s == name) return value;
    std::string known;
    for (const auto& [name, value] : names) known += (known.empty() ? "" : ", ") + std::string(name);
    throw std::invalid_argument(std::string("unknown ") + what + " '" + s + "' (expected " + known +
                                ")");
}

constexpr std::array<std::pair<const char*, Dgp>, 2> kDgps{{{"linear", Dgp::linear},
                                                             {"logit", Dgp::logit}}};
constexpr std::array<std::pair<const char*, ErrorLaw>, 4> kLaws{{{"normal", ErrorLaw::normal},
                                                                  {"student_t5", ErrorLaw::student_t5},
                                                                  {"chisq3", ErrorLaw::chisq3},
                                                                  {"lognormal", ErrorLaw::lognormal}}};
constexpr std::array<std::pair<const char*, HeteroMap>, 3> kHetero{{{"unit", HeteroMap::unit},
                                                                     {"abs_x", HeteroMap::abs_x},
                                                                     {"exp_04x", HeteroMap::exp_04x}}};
constexpr std::array<std::pair<const char*, XLaw>, 2> kXLaws{
    {{"standard_normal", XLaw::standard_normal}, {"dichotomous_balanced", XLaw::dichotomous_balanced}}};
constexpr std::array<std::pair<const char*, SeMode>, 2> kSeModes{{{"ordinary", SeMode::ordinary},
                                                                   {"robust", SeMode::robust}}};

template <class E, std::size_t N>
const char* name_of(E v, const std::array<std::pair<const char*, E>, N>& names) noexcept
{
    for (const auto& [name, value] : names)
        if (value == v) return name;
    return "?";
}

double hetero_scale(HeteroMap map, double x)
{
    switch (map) {
        case HeteroMap::abs_x: return std::fabs(x);
        case HeteroMap::exp_04x: return std::exp(0.4 * x);
        case HeteroMap::unit: break;
    }
    return 1.0;
}

}  // namespace

const char* to_string(Dgp v) noexcept { return name_of(v, kDgps); }
const char* to_string(ErrorLaw v) noexcept { return name_of(v, kLaws); }
const char* to_string(HeteroMap v) noexcept { return name_of(v, kHetero); }
const char* to_string(XLaw v) noexcept { return name_of(v, kXLaws); }
const char* to_string(SeMode v) noexcept { return name_of(v, kSeModes); }
Dgp parse_dgp(const std::string& s) { return parse_enum(s, kDgps, "dgp"); }
ErrorLaw parse_error_law(const std::string& s) { return parse_enum(s, kLaws, "error law"); }
HeteroMap parse_hetero_map(const std::string& s) { return parse_enum(s, kHetero, "hetero map"); }
XLaw parse_x_law(const std::string& s) { return parse_enum(s, kXLaws, "x law"); }
SeMode parse_se_mode(const std::string& s) { return parse_enum(s, kSeModes, "se mode"); }

const char* to_string(TestKind t) noexcept
{
    switch (t) {
        case TestKind::lr: return "lr";
        case TestKind::wald: return "wald";
        case TestKind::simply_augmented: return "simply_augmented";
        case TestKind::truncated: return "truncated";
        case TestKind::exact: return "exact";
    }
    return "?";
}

void SimulationConfig::validate() const
{
    if (n < 6) throw std::invalid_argument("simulation: n must be >= 6");
    if (reps < 1) throw std::invalid_argument("simulation: reps must be >= 1");
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("simulation: alpha must lie in (0, 1)");
    if (!std::isfinite(theta1) || !std::isfinite(theta2) || !std::isfinite(tau))
        throw std::invalid_argument("simulation: parameters must be finite");
    if (workers < 1) throw std::invalid_argument("simulation: workers must be >= 1");
}

double SimulationResult::frequency(TestKind t) const
{
    return valid > 0 ? static_cast<double>(rejections[static_cast<int>(t)]) / valid : 0.0;
}

double SimulationResult::standard_error(TestKind t) const
{
    if (valid == 0) return 0.0;
    const double p = frequency(t);
    return std::sqrt(p * (1.0 - p) / valid);
}

std::mt19937_64 replication_stream(std::uint64_t seed, std::uint64_t replication)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32)};
    return std::mt19937_64(seq);
}

Eigen::VectorXd draw_errors(ErrorLaw law, int n, std::mt19937_64& stream)
{
    Eigen::VectorXd out(n);
    switch (law) {
        case ErrorLaw::normal: {
            std::normal_distribution<double> d;
            for (int i = 0; i < n; ++i) out(i) = d(stream);
            break;
        }
        case ErrorLaw::student_t5: {
            std::student_t_distribution<double> d(5.0);
            const double scale = std::sqrt(3.0 / 5.0);
            for (int i = 0; i < n; ++i) out(i) = d(stream) * scale;
            break;
        }
        case ErrorLaw::chisq3: {
            std::chi_squared_distribution<double> d(3.0);
            const double scale = 1.0 / std::sqrt(6.0);
            for (int i = 0; i < n; ++i) out(i) = (d(stream) - 3.0) * scale;
            break;
        }
        case ErrorLaw::lognormal: {
            std::lognormal_distribution<double> d(0.0, 1.0);
            const double e = std::exp(1.0);
            const double mean = std::sqrt(e);
            const double scale = 1.0 / std::sqrt(e * e - e);
            for (int i = 0; i < n; ++i) out(i) = (d(stream) - mean) * scale;
            break;
        }
    }
    return out;
}

double theta2_for_lambda(double lambda2, int n, bool literal)
{
    if (!(lambda2 >= 0.0)) throw std::domain_error("theta2_for_lambda: lambda2 must be >= 0");
    if (n <= 2) throw std::domain_error("theta2_for_lambda: n must be > 2");
    return literal ? std::sqrt(lambda2 * (n - 2)) : std::sqrt(lambda2 / (n - 2));
}

Dataset simulate_dataset(const SimulationConfig& cfg, std::mt19937_64& stream)
{
    const int n = cfg.n;
    Dataset d;
    d.x.resize(n);
    if (cfg.x_law == XLaw::dichotomous_balanced) {
        for (int i = 0; i < n; ++i) d.x(i) = i < n / 2 ? 0.0 : 1.0;
    } else {
        std::normal_distribution<double> z;
        for (int i = 0; i < n; ++i) d.x(i) = z(stream);
    }
    const Eigen::VectorXd u1 = draw_errors(cfg.error_law, n, stream);
    Eigen::VectorXd sigma(n);
    for (int i = 0; i < n; ++i) sigma(i) = hetero_scale(cfg.hetero_map, d.x(i));
    d.m = cfg.theta1 * d.x + sigma.cwiseProduct(u1);
    if (cfg.dgp == Dgp::logit) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        d.y.resize(n);
        for (int i = 0; i < n; ++i) {
            double u = unif(stream);
            while (u <= 0.0) u = unif(stream);
            const double eps = std::log(u / (1.0 - u));
            d.y(i) = cfg.tau * d.x(i) + cfg.theta2 * d.m(i) + eps > 0.0 ? 1.0 : 0.0;
        }
    } else {
        const Eigen::VectorXd u2 = draw_errors(cfg.error_law, n, stream);
        d.y = cfg.tau * d.x + cfg.theta2 * d.m + sigma.cwiseProduct(u2);
    }
    d.controls.resize(n, 0);
    return d;
}

SimulationResult run_campaign(const SimulationConfig& cfg, const CriticalTable& table)
{
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    MediationOptions opts;
    opts.se_mode = cfg.se_mode;
    opts.model = cfg.dgp == Dgp::logit ? OutcomeModel::logit_outcome : OutcomeModel::linear;
    opts.alpha = cfg.alpha;
    opts.hc1 = cfg.hc1;
    const CriticalPair row = table.at(cfg.alpha);
    const double b_bar = truncated_slope(cfg.alpha);
    const auto exact_r = exact_r_for_alpha(cfg.alpha);
    const ExactTestSpec exact = build_exact_spec(exact_r.value_or(0));

    constexpr long kChunk = 1000;
    const long chunks = (cfg.reps + kChunk - 1) / kChunk;
    struct Tally {
        long valid = 0;
        long failed = 0;
        std::array<long, kTestKinds> rejections{};
    };
    std::vector<Tally> tallies(static_cast<std::size_t>(chunks));
    std::atomic<long> next{0};
    auto work = [&] {
        for (long c; (c = next.fetch_add(1)) < chunks;) {
            Tally& t = tallies[static_cast<std::size_t>(c)];
            const long end = std::min(cfg.reps, (c + 1) * kChunk);
            for (long rep = c * kChunk; rep < end; ++rep) {
                auto stream = replication_stream(cfg.seed, static_cast<std::uint64_t>(rep));
                const Dataset data = simulate_dataset(cfg, stream);
                double t1 = 0.0;
                double t2 = 0.0;
                try {
                    std::tie(t1, t2) = mediation_t(data, opts);
                } catch (const EstimationError&) {
                    ++t.failed;
                    continue;
                }
                if (!std::isfinite(t1) || !std::isfinite(t2)) {
                    ++t.failed;
                    continue;
                }
                ++t.valid;
                const OrderedPair pt = OrderedPair::from_t(t1, t2);
                t.rejections[0] += decide_lr(pt, cfg.alpha);
                t.rejections[1] += decide_wald(pt, cfg.alpha);
                t.rejections[2] += decide_simply_augmented(pt, row).reject;
                t.rejections[3] += decide_truncated(pt, cfg.alpha, b_bar);
                if (exact_r) t.rejections[4] += decide_exact(pt, exact);
            }
        }
    };
    const unsigned workers = static_cast<unsigned>(std::min<long>(cfg.workers, chunks));
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    SimulationResult res;
    res.config = cfg;
    res.exact_defined = exact_r.has_value();
    for (const Tally& t : tallies) {
        res.valid += t.valid;
        res.failed += t.failed;
        for (int k = 0; k < kTestKinds; ++k) res.rejections[k] += t.rejections[k];
    }
    res.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

namespace {

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t\r");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

double to_number(const std::string& key, const std::string& s)
{
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size())
        throw std::invalid_argument("campaign key '" + key + "': not a number: '" + s + "'");
    return v;
}

// Every value as a list of strings, whichever syntax the file used.
std::map<std::string, std::vector<std::string>> campaign_entries(const std::string& text)
{
    std::map<std::string, std::vector<std::string>> out;
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument(std::string("campaign JSON: ") + e.what());
        }
        auto scalar = [](const nlohmann::json& v) {
            if (v.is_string()) return v.get<std::string>();
            if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
            if (v.is_number_integer()) return std::to_string(v.get<long long>());
            if (v.is_number()) {
                char buf[40];
                std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
                return std::string(buf);
            }
            throw std::invalid_argument("campaign JSON: unsupported value " + v.dump());
        };
        for (const auto& [key, value] : doc.items()) {
            auto& list = out[key];
            if (value.is_array())
                for (const auto& v : value) list.push_back(scalar(v));
            else
                list.push_back(scalar(value));
        }
        return out;
    }
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("campaign line " + std::to_string(lineno) +
                                        ": expected key=value");
        auto key = line.substr(0, eq);
        key.erase(0, key.find_first_not_of(" \t"));
        key.erase(key.find_last_not_of(" \t") + 1);
        out[key] = split_list(line.substr(eq + 1));
    }
    return out;
}

}  // namespace

CampaignSpec parse_campaign(const std::string& text)
{
    CampaignSpec spec;
    SimulationConfig& b = spec.base;
    for (const auto& [key, values] : campaign_entries(text)) {
        if (values.empty()) throw std::invalid_argument("campaign key '" + key + "' has no value");
        const std::string& v = values.front();
        auto single = [&] {
            if (values.size() != 1)
                throw std::invalid_argument("campaign key '" + key + "' takes one value");
        };
        if (key == "n") {
            for (const auto& s : values) spec.n.push_back(static_cast<int>(to_number(key, s)));
        } else if (key == "reps") {
            single();
            b.reps = static_cast<long>(to_number(key, v));
        } else if (key == "seed") {
            single();
            b.seed = std::stoull(v);
        } else if (key == "dgp") {
            single();
            b.dgp = parse_dgp(v);
        } else if (key == "error_law") {
            for (const auto& s : values) spec.error_laws.push_back(parse_error_law(s));
        } else if (key == "hetero_map" || key == "hetero") {
            for (const auto& s : values) spec.hetero_maps.push_back(parse_hetero_map(s));
        } else if (key == "se_mode") {
            for (const auto& s : values) spec.se_modes.push_back(parse_se_mode(s));
        } else if (key == "x_law") {
            single();
            b.x_law = parse_x_law(v);
        } else if (key == "theta1") {
            single();
            b.theta1 = to_number(key, v);
        } else if (key == "theta2") {
            for (const auto& s : values) spec.theta2.push_back(to_number(key, s));
        } else if (key == "lambda2") {
            for (const auto& s : values) spec.lambda2.push_back(to_number(key, s));
        } else if (key == "literal_lambda_map") {
            single();
            spec.literal_lambda_map = v == "true" || v == "1";
        } else if (key == "tau") {
            single();
            b.tau = to_number(key, v);
        } else if (key == "alpha") {
            single();
            b.alpha = to_number(key, v);
        } else if (key == "hc1") {
            single();
            b.hc1 = v == "true" || v == "1";
        } else if (key == "workers") {
            single();
            b.workers = static_cast<unsigned>(to_number(key, v));
        } else {
            throw std::invalid_argument("unknown campaign key '" + key + "'");
        }
    }
    if (spec.n.empty()) spec.n.push_back(b.n);
    if (spec.error_laws.empty()) spec.error_laws.push_back(b.error_law);
    if (spec.hetero_maps.empty()) spec.hetero_maps.push_back(b.hetero_map);
    if (spec.se_modes.empty()) spec.se_modes.push_back(b.se_mode);
    if (spec.theta2.empty() && spec.lambda2.empty()) spec.theta2.push_back(b.theta2);
    if (!spec.theta2.empty() && !spec.lambda2.empty())
        throw std::invalid_argument("campaign: give either theta2 or lambda2, not both");
    b.validate();
    return spec;
}

std::vector<CampaignRow> run_campaign_grid(const CampaignSpec& spec, const CriticalTable& table)
{
    std::vector<CampaignRow> rows;
    const bool by_lambda = !spec.lambda2.empty();
    const auto& grid = by_lambda ? spec.lambda2 : spec.theta2;
    for (int n : spec.n)
        for (ErrorLaw law : spec.error_laws)
            for (HeteroMap hetero : spec.hetero_maps)
                for (SeMode se : spec.se_modes)
                    for (double g : grid) {
                        SimulationConfig cfg = spec.base;
                        cfg.n = n;
                        cfg.error_law = law;
                        cfg.hetero_map = hetero;
                        cfg.se_mode = se;
                        cfg.theta2 = by_lambda ? theta2_for_lambda(g, n, spec.literal_lambda_map) : g;
                        rows.push_back({run_campaign(cfg, table),
                                        by_lambda ? g : std::numeric_limits<double>::quiet_NaN()});
                    }
    return rows;
}

void write_campaign_csv(std::ostream& os, const std::vector<CampaignRow>& rows)
{
    os << "test,theta2,lambda2,n,error_law,hetero,se_mode,dgp,alpha,reps,valid,failed,rejections,"
          "frequency,se\n";
    char buf[512];
    for (const auto& row : rows) {
        const auto& r = row.result;
        const auto& c = r.config;
        for (int k = 0; k < kTestKinds; ++k) {
            const auto t = static_cast<TestKind>(k);
            if (t == TestKind::exact && !r.exact_defined) continue;
            char lam[40] = "";
            if (!std::isnan(row.lambda2)) std::snprintf(lam, sizeof lam, "%.17g", row.lambda2);
            std::snprintf(buf, sizeof buf, "%s,%.17g,%s,%d,%s,%s,%s,%s,%.17g,%ld,%ld,%ld,%ld,%.17g,%.17g\n",
                          to_string(t), c.theta2, lam, c.n, to_string(c.error_law),
                          to_string(c.hetero_map), to_string(c.se_mode), to_string(c.dgp), c.alpha,
                          c.reps, r.valid, r.failed, r.rejections[k], r.frequency(t),
                          r.standard_error(t));
            os << buf;
        }
    }
}

}  // namespace medtest
