#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "medtest/calibrate.hpp"
#include "medtest/dist_core.hpp"
#include "medtest/estimate.hpp"
#include "medtest/roots.hpp"
#include "medtest/simulate.hpp"
#include "medtest/size_power.hpp"
#include "medtest/tables.hpp"
#include "medtest/test_rules.hpp"

using namespace medtest;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CriticalTable load_table(const std::string& path)
{
    if (path.empty()) return default_table();
    std::istringstream in(read_file(path));
    return CriticalTable::read_csv(in);
}

std::string fmt(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// "lo:hi:count" (inclusive, evenly spaced), "log:lo:hi:count", or a comma list.
std::vector<double> parse_grid(const std::string& spec)
{
    auto num = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size()) throw UsageError("bad grid value '" + s + "' in '" + spec + "'");
        return v;
    };
    std::vector<std::string> parts;
    const char sep = spec.find(':') != std::string::npos ? ':' : ',';
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, sep);) parts.push_back(p);
    std::vector<double> out;
    if (sep == ',') {
        for (const auto& p : parts) out.push_back(num(p));
    } else {
        const bool log = !parts.empty() && parts[0] == "log";
        if (log) parts.erase(parts.begin());
        if (parts.size() != 3) throw UsageError("grid must be lo:hi:count or log:lo:hi:count");
        const double lo = num(parts[0]), hi = num(parts[1]);
        const double count = num(parts[2]);
        if (!(count >= 1) || count != std::floor(count) || !(hi >= lo))
            throw UsageError("bad grid '" + spec + "'");
        if (log && !(lo > 0.0)) throw UsageError("log grid needs lo > 0");
        const int k = static_cast<int>(count);
        for (int i = 0; i < k; ++i) {
            const double t = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
            out.push_back(log ? std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))) : lo + t * (hi - lo));
        }
    }
    for (double v : out)
        if (!(v >= 0.0) || !std::isfinite(v)) throw UsageError("grid values must be finite and >= 0");
    return out;
}

void check_alpha(double alpha)
{
    if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("--alpha must lie in (0, 1)");
}

struct RegionChoice {
    std::string test = "simply_augmented";
    double alpha = 0.05;
    double b = std::nan("");
    int r = -1;
    std::string table;
};

Region make_region(const RegionChoice& c)
{
    check_alpha(c.alpha);
    if (c.test == "lr") return LrRegion{c.alpha};
    if (c.test == "wald") return WaldRegion{c.alpha};
    if (c.test == "simply_augmented")
        return SimplyAugmentedRegion{c.alpha, std::isnan(c.b) ? load_table(c.table).at(c.alpha).b : c.b};
    if (c.test == "truncated")
        return TruncatedRegion{c.alpha, std::isnan(c.b) ? truncated_slope(c.alpha) : c.b};
    if (c.test == "exact") {
        int r = c.r;
        if (r < 0) {
            const auto from_alpha = exact_r_for_alpha(c.alpha);
            if (!from_alpha) throw UsageError("exact test needs --r or alpha = 1/(r+2)");
            r = *from_alpha;
        }
        return ExactRegion{build_exact_spec(r)};
    }
    throw UsageError("unknown test '" + c.test + "'");
}

void add_region_options(CLI::App* cmd, RegionChoice& c)
{
    cmd->add_option("--test", c.test, "lr, wald, simply_augmented, truncated or exact")
        ->check(CLI::IsMember({"lr", "wald", "simply_augmented", "truncated", "exact"}))
        ->capture_default_str();
    cmd->add_option("--alpha", c.alpha, "significance level")->capture_default_str();
    cmd->add_option("--b", c.b, "slope override (default: calibrated)");
    cmd->add_option("--r", c.r, "exact-test knot count parameter");
    cmd->add_option("--table", c.table, "critical table CSV (default: built-in)");
}

void write_rows(std::ostream& os, const std::string& format, const std::vector<std::string>& header,
                const std::vector<std::vector<double>>& rows)
{
    const char sep = format == "tsv" ? '\t' : ',';
    if (format == "json") {
        json out = json::array();
        for (const auto& row : rows) {
            json obj;
            for (std::size_t i = 0; i < header.size(); ++i) obj[header[i]] = row[i];
            out.push_back(obj);
        }
        os << out.dump(2) << '\n';
        return;
    }
    for (std::size_t i = 0; i < header.size(); ++i) os << (i ? std::string(1, sep) : "") << header[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? std::string(1, sep) : "") << fmt(row[i]);
        os << '\n';
    }
}

template <class F>
void emit(const std::string& output, F&& write)
{
    if (output.empty() || output == "-") {
        write(std::cout);
        return;
    }
    std::ofstream out(output, std::ios::binary);
    if (!out) throw UsageError("cannot write '" + output + "'");
    write(out);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Tests for a mediation effect: decisions, p-values, critical values, size and power "
                 "curves, Monte Carlo campaigns."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "medtest 1.0.0");
    std::string format = "csv";
    std::string output;

    // test
    auto* test = app.add_subcommand("test", "Run every test on a t-statistic pair or a data file");
    double t1 = std::nan(""), t2 = std::nan("");
    double alpha = 0.05;
    std::string data_path, table_path, se = "robust", model = "linear";
    CsvColumns cols{"y", "x", "m", {}};
    bool hc1 = false, no_intercept = false;
    auto* opt_t1 = test->add_option("--t1", t1, "t-statistic of the first coefficient");
    auto* opt_t2 = test->add_option("--t2", t2, "t-statistic of the second coefficient");
    auto* opt_data = test->add_option("--data", data_path, "CSV file with a header row");
    opt_t1->needs(opt_t2);
    opt_t2->needs(opt_t1);
    opt_data->excludes(opt_t1)->excludes(opt_t2);
    test->add_option("--alpha", alpha, "significance level")->capture_default_str();
    test->add_option("--y", cols.y, "outcome column")->capture_default_str();
    test->add_option("--x", cols.x, "treatment column")->capture_default_str();
    test->add_option("--m", cols.m, "mediator column")->capture_default_str();
    test->add_option("--controls", cols.controls, "control columns")->delimiter(',');
    test->add_option("--se", se, "standard errors")->check(CLI::IsMember({"robust", "ordinary"}))->capture_default_str();
    test->add_option("--model", model, "outcome model")->check(CLI::IsMember({"linear", "logit"}))->capture_default_str();
    test->add_flag("--hc1", hc1, "degrees-of-freedom correction for robust SEs");
    test->add_flag("--no-intercept", no_intercept, "fit without intercepts");
    test->add_option("--table", table_path, "critical table CSV (default: built-in)");

    // pvalue
    auto* pv = app.add_subcommand("pvalue", "p-value of the simply-augmented test");
    pv->add_option("--t1", t1)->required();
    pv->add_option("--t2", t2)->required();
    pv->add_option("--table", table_path, "critical table CSV (default: built-in)");

    // table
    auto* tab = app.add_subcommand("table", "Calibrate the critical-value table");
    std::string levels = "percentile";
    double epsilon = CalibrationConfig{}.epsilon;
    unsigned workers = 0;
    bool to_cache = false;
    std::string table_format = "csv";
    tab->add_option("--levels", levels, "'percentile', a comma list, or a file of levels")->capture_default_str();
    tab->add_option("--epsilon", epsilon, "feasibility margin")->capture_default_str();
    tab->add_option("--workers", workers, "threads (0: all cores)");
    tab->add_option("--format", table_format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    tab->add_option("-o,--output", output, "output file (default: stdout)");
    tab->add_flag("--cache", to_cache, std::string("also store the CSV under $") + kCacheDirEnv);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "Optimal slope at one level");
    bool truncated = false;
    std::string trace_path;
    cal->add_option("--alpha", alpha)->capture_default_str();
    cal->add_option("--epsilon", epsilon)->capture_default_str();
    cal->add_flag("--truncated", truncated, "calibrate the truncated test instead");
    cal->add_option("--trace", trace_path, "write the search trace (TSV)");

    // nrp / power
    RegionChoice nrp_choice, power_choice;
    std::string lambda_grid = "0:25:101", lambda1_grid = "0:10:11", lambda2_grid = "0:10:11";
    bool minus_lr = false;
    auto* nrp = app.add_subcommand("nrp", "Null rejection probability curve");
    add_region_options(nrp, nrp_choice);
    nrp->add_option("--lambda-grid", lambda_grid, "lo:hi:count, log:lo:hi:count or a comma list")->capture_default_str();
    nrp->add_option("--format", format)->check(CLI::IsMember({"csv", "tsv", "json"}))->capture_default_str();
    nrp->add_option("-o,--output", output);
    auto* pow = app.add_subcommand("power", "Power surface");
    add_region_options(pow, power_choice);
    pow->add_option("--lambda1", lambda1_grid)->capture_default_str();
    pow->add_option("--lambda2", lambda2_grid)->capture_default_str();
    pow->add_flag("--minus-lr", minus_lr, "report the difference from the LR test");
    pow->add_option("--format", format)->check(CLI::IsMember({"csv", "tsv", "json"}))->capture_default_str();
    pow->add_option("-o,--output", output);

    // exact
    auto* ex = app.add_subcommand("exact", "Knots of the exact similar test");
    int r = -1;
    auto* opt_r = ex->add_option("--r", r, "alpha = 1/(r+2)");
    ex->add_option("--alpha", alpha)->excludes(opt_r);

    // simulate
    auto* sim = app.add_subcommand("simulate", "Monte Carlo campaign");
    std::string config_path;
    long reps = 0;
    std::uint64_t seed = 0;
    unsigned sim_workers = 0;
    sim->add_option("--config", config_path, "campaign file (JSON or key=value)")->required();
    auto* opt_seed = sim->add_option("--seed", seed, "overrides the config seed");
    auto* opt_reps = sim->add_option("--reps", reps, "overrides the config replications");
    sim->add_option("--workers", sim_workers, "threads (output does not depend on this)");
    sim->add_option("--table", table_path, "critical table CSV (default: built-in)");
    sim->add_option("-o,--output", output);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*test) {
            check_alpha(alpha);
            const CriticalTable table = load_table(table_path);
            TestReport report;
            if (!data_path.empty()) {
                std::ifstream in(data_path);
                if (!in) throw UsageError("cannot open '" + data_path + "'");
                MediationOptions opts;
                opts.alpha = alpha;
                opts.se_mode = parse_se_mode(se);
                opts.model = model == "logit" ? OutcomeModel::logit_outcome : OutcomeModel::linear;
                opts.hc1 = hc1;
                opts.intercept = !no_intercept;
                report = run_mediation_test(read_dataset_csv(in, cols), opts, table);
            } else if (!std::isnan(t1)) {
                report = evaluate_tests(t1, t2, alpha, table, truncated_slope(alpha));
            } else {
                throw UsageError("test: give --t1 and --t2, or --data");
            }
            std::cout << to_json(report) << '\n';
        } else if (*pv) {
            const double p = p_value(OrderedPair::from_t(t1, t2), load_table(table_path));
            std::cout << json{{"t1", t1}, {"t2", t2}, {"p_value", p}}.dump(2) << '\n';
        } else if (*tab) {
            CalibrationConfig cfg;
            cfg.epsilon = epsilon;
            cfg.workers = workers;
            std::vector<double> lv;
            if (levels == "percentile") {
                lv = percentile_levels();
            } else if (levels.find_first_not_of("0123456789.,eE-+ ") == std::string::npos) {
                lv = parse_grid(levels);
            } else {
                std::string text = read_file(levels);
                for (char& ch : text)
                    if (ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') ch = ',';
                std::string cleaned;
                for (std::size_t i = 0; i < text.size(); ++i)
                    if (!(text[i] == ',' && (cleaned.empty() || cleaned.back() == ','))) cleaned += text[i];
                if (!cleaned.empty() && cleaned.back() == ',') cleaned.pop_back();
                lv = parse_grid(cleaned);
            }
            const CriticalTable table = generate_table(lv, cfg);
            emit(output, [&](std::ostream& os) {
                if (table_format == "json")
                    os << table.to_json() << '\n';
                else
                    table.write_csv(os);
            });
            if (to_cache) {
                const auto path = cached_table_path(epsilon);
                if (!path) throw UsageError(std::string("--cache needs $") + kCacheDirEnv);
                std::filesystem::create_directories(path->parent_path());
                std::ofstream out(*path, std::ios::binary);
                if (!out) throw UsageError("cannot write '" + path->string() + "'");
                table.write_csv(out);
                std::cerr << "cached " << path->string() << '\n';
            }
        } else if (*cal) {
            check_alpha(alpha);
            CalibrationConfig cfg;
            cfg.epsilon = epsilon;
            cfg.keep_trace = !trace_path.empty();
            const CalibrationResult res = truncated ? optimal_b_truncated(alpha, cfg) : optimal_b(alpha, cfg);
            json roots = json::array();
            for (const auto& sp : res.roots)
                roots.push_back({{"lambda", sp.lambda}, {"discrepancy", sp.d}, {"maximum", sp.maximum}});
            json out{{"alpha", res.alpha}, {"test", truncated ? "truncated" : "simply_augmented"},
                     {"epsilon", epsilon},  {"b", res.b_opt},
                     {"roots", roots},      {"iterations", res.iterations},
                     {"evaluations", res.evaluations}};
            std::cout << out.dump(2) << '\n';
            if (!trace_path.empty()) {
                std::ofstream tr(trace_path);
                if (!tr) throw UsageError("cannot write '" + trace_path + "'");
                write_trace_tsv(tr, res);
            }
        } else if (*nrp) {
            const Region region = make_region(nrp_choice);
            std::vector<std::vector<double>> rows;
            for (double lam : parse_grid(lambda_grid))
                rows.push_back({lam, null_rejection_probability(region, lam)});
            emit(output, [&](std::ostream& os) { write_rows(os, format, {"lambda", "nrp"}, rows); });
        } else if (*pow) {
            const Region region = make_region(power_choice);
            const LrRegion lr{power_choice.alpha};
            std::vector<std::vector<double>> rows;
            for (double l1 : parse_grid(lambda1_grid))
                for (double l2 : parse_grid(lambda2_grid)) {
                    const NoncentralityPair nc{l1, l2};
                    double p = rejection_probability(region, nc);
                    if (minus_lr) p -= rejection_probability(lr, nc);
                    rows.push_back({l1, l2, p});
                }
            emit(output, [&](std::ostream& os) {
                write_rows(os, format, {"lambda1", "lambda2", minus_lr ? "power_minus_lr" : "power"}, rows);
            });
        } else if (*ex) {
            if (r < 0) {
                check_alpha(alpha);
                const auto from_alpha = exact_r_for_alpha(alpha);
                if (!from_alpha) throw UsageError("exact: alpha must equal 1/(r+2); give --r instead");
                r = *from_alpha;
            }
            const ExactTestSpec spec = build_exact_spec(r);
            std::cout << json{{"r", spec.r}, {"alpha", spec.alpha}, {"knots", spec.knots}}.dump(2) << '\n';
        } else if (*sim) {
            CampaignSpec spec = parse_campaign(read_file(config_path));
            if (*opt_seed) spec.base.seed = seed;
            if (*opt_reps) spec.base.reps = reps;
            if (sim_workers > 0) spec.base.workers = sim_workers;
            spec.base.validate();
            const auto rows = run_campaign_grid(spec, load_table(table_path));
            emit(output, [&](std::ostream& os) { write_campaign_csv(os, rows); });
            double seconds = 0.0;
            for (const auto& row : rows) seconds += row.result.elapsed_seconds;
            std::cerr << rows.size() << " configurations in " << seconds << " s\n";
        }
    } catch (const NonConvergence& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
