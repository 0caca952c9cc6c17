#include "medtest/estimate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <sstream>

#include "medtest/tables.hpp"

namespace medtest {

namespace {

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        const auto b = cell.find_first_not_of(" \t\r\"");
        const auto e = cell.find_last_not_of(" \t\r\"");
        out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
    }
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, int lineno, const std::string& column)
{
    const std::string where = " at line " + std::to_string(lineno) + ", column '" + column + "'";
    if (cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == ".")
        throw EstimationError("missing value" + where);
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(cell, &used);
    } catch (const std::exception&) {
        throw EstimationError("non-numeric value '" + cell + "'" + where);
    }
    if (used != cell.size() || !std::isfinite(x))
        throw EstimationError("non-numeric value '" + cell + "'" + where);
    return x;
}

// A^-1 (sum w_i w_i' e_i^2) A^-1.
template <class Design>
Eigen::MatrixXd sandwich(const Design& w, const Eigen::VectorXd& e, const Eigen::MatrixXd& a_inv)
{
    const Eigen::MatrixXd we = w.array().colwise() * e.array();
    const Eigen::MatrixXd meat = we.transpose() * we;
    return a_inv * meat * a_inv;
}

// m = theta1 x + u1 on residualized data: fills theta1, s11, s_xx, resid1,
// both standard errors and the ordinary t1.
void fit_mediator(const Dataset& data, RegressionFit& fit)
{
    const double n = static_cast<double>(data.n());
    const double df1 = n - 1.0 - data.partialled;
    const Eigen::VectorXd& x = data.x;
    fit.s_xx = x.squaredNorm();
    if (!(fit.s_xx > 1e-300) || fit.s_xx <= 1e-14 * n * std::max(1.0, x.cwiseAbs().maxCoeff()))
        throw EstimationError("x is constant after residualization");
    fit.theta1_hat = x.dot(data.m) / fit.s_xx;
    fit.resid1 = data.m - fit.theta1_hat * x;
    fit.s11 = fit.resid1.squaredNorm();
    if (!(fit.s11 > 0.0)) throw EstimationError("perfect fit: zero mediator residuals");
    fit.se_ordinary(0) = std::sqrt(fit.s11 / df1 / fit.s_xx);
    fit.t1 = fit.theta1_hat / fit.se_ordinary(0);
    fit.se_robust(0) =
        std::sqrt((x.array().square() * fit.resid1.array().square()).sum()) / fit.s_xx;
}

}  // namespace

void Dataset::validate() const
{
    const Eigen::Index n = x.size();
    if (y.size() != n || m.size() != n)
        throw EstimationError("y, x and m must have equal lengths");
    if (controls.cols() > 0 && controls.rows() != n)
        throw EstimationError("controls must have one row per observation");
    if (static_cast<Eigen::Index>(control_names.size()) != controls.cols())
        throw EstimationError("one name per control column is required");
    if (n <= controls.cols() + partialled + 3)
        throw EstimationError("need more than k + 3 observations");
    if (!y.allFinite() || !x.allFinite() || !m.allFinite() || !controls.allFinite())
        throw EstimationError("data contain non-finite values");
}

Dataset Dataset::with_intercept() const
{
    Dataset d = *this;
    d.controls.resize(n(), controls.cols() + 1);
    d.controls.col(0).setOnes();
    if (controls.cols() > 0) d.controls.rightCols(controls.cols()) = controls;
    d.control_names.insert(d.control_names.begin(), "(intercept)");
    return d;
}

Dataset read_dataset_csv(std::istream& is, const CsvColumns& cols)
{
    std::string line;
    if (!std::getline(is, line)) throw EstimationError("CSV input is empty");
    const auto header = split_csv_line(line);
    auto index_of = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw EstimationError("missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t iy = index_of(cols.y);
    const std::size_t ix = index_of(cols.x);
    const std::size_t im = index_of(cols.m);
    std::vector<std::size_t> ic;
    for (const auto& c : cols.controls) ic.push_back(index_of(c));

    std::vector<double> y, x, m;
    std::vector<std::vector<double>> c(ic.size());
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw EstimationError("line " + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " fields, found " +
                                  std::to_string(cells.size()));
        y.push_back(parse_cell(cells[iy], lineno, cols.y));
        x.push_back(parse_cell(cells[ix], lineno, cols.x));
        m.push_back(parse_cell(cells[im], lineno, cols.m));
        for (std::size_t j = 0; j < ic.size(); ++j)
            c[j].push_back(parse_cell(cells[ic[j]], lineno, cols.controls[j]));
    }
    Dataset d;
    const auto n = static_cast<Eigen::Index>(x.size());
    d.y = Eigen::Map<Eigen::VectorXd>(y.data(), n);
    d.x = Eigen::Map<Eigen::VectorXd>(x.data(), n);
    d.m = Eigen::Map<Eigen::VectorXd>(m.data(), n);
    d.controls.resize(n, static_cast<Eigen::Index>(ic.size()));
    for (std::size_t j = 0; j < ic.size(); ++j)
        d.controls.col(static_cast<Eigen::Index>(j)) = Eigen::Map<Eigen::VectorXd>(c[j].data(), n);
    d.control_names = cols.controls;
    return d;
}

Dataset residualize(const Dataset& data)
{
    data.validate();
    const Eigen::Index k = data.controls.cols();
    if (k == 0) return data;
    Dataset out;
    out.partialled = data.partialled + static_cast<int>(k);
    const Eigen::MatrixXd& c = data.controls;
    if (k == 1 && (c.array() == c(0, 0)).all() && c(0, 0) != 0.0) {
        // Constant column: projection is demeaning.
        out.y = data.y.array() - data.y.mean();
        out.x = data.x.array() - data.x.mean();
        out.m = data.m.array() - data.m.mean();
        return out;
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(c);
    if (qr.rank() < k) {
        // Name each column that adds nothing to the span of those before it.
        std::string bad;
        Eigen::Index rank = 0;
        for (Eigen::Index j = 0; j < k; ++j) {
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> partial(c.leftCols(j + 1));
            if (partial.rank() == rank) bad += (bad.empty() ? "" : ", ") + data.control_names[j];
            rank = partial.rank();
        }
        throw EstimationError("controls are rank deficient; redundant column(s): " + bad);
    }
    auto resid = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
        return v - c * qr.solve(v);
    };
    out.y = resid(data.y);
    out.x = resid(data.x);
    out.m = resid(data.m);
    return out;
}

RegressionFit fit_linear(const Dataset& input)
{
    const Dataset data = input.controls.cols() > 0 ? residualize(input) : input;
    data.validate();
    const double n = static_cast<double>(data.n());
    const double df2 = n - 2.0 - data.partialled;
    const Eigen::VectorXd& x = data.x;
    const Eigen::VectorXd& m = data.m;
    const Eigen::VectorXd& y = data.y;

    RegressionFit fit;
    fit_mediator(data, fit);
    Eigen::Matrix2d a;
    a << fit.s_xx, x.dot(m), x.dot(m), m.squaredNorm();
    const double det = a.determinant();
    if (!(det > 1e-12 * a(0, 0) * a(1, 1)))
        throw EstimationError("singular cross-product: m is collinear with x");
    const Eigen::Matrix2d a_inv = a.inverse();
    const Eigen::Vector2d beta = a_inv * Eigen::Vector2d(x.dot(y), m.dot(y));
    fit.tau_hat = beta(0);
    fit.theta2_hat = beta(1);
    fit.resid2 = y - fit.tau_hat * x - fit.theta2_hat * m;
    fit.s22 = fit.resid2.squaredNorm();
    if (!(fit.s22 > 0.0)) throw EstimationError("perfect fit: zero outcome residuals");

    const double sigma22 = fit.s22 / df2;
    fit.se_ordinary(1) = std::sqrt(sigma22 * a_inv(0, 0));
    fit.se_ordinary(2) = std::sqrt(sigma22 * a_inv(1, 1));
    fit.t2 = fit.theta2_hat / fit.se_ordinary(2);

    Eigen::Matrix<double, Eigen::Dynamic, 2> w(data.n(), 2);
    w.col(0) = x;
    w.col(1) = m;
    const Eigen::MatrixXd v2 = sandwich(w, fit.resid2, a_inv);
    fit.se_robust(1) = std::sqrt(std::max(0.0, v2(0, 0)));
    fit.se_robust(2) = std::sqrt(std::max(0.0, v2(1, 1)));
    return fit;
}

std::pair<double, double> robust_t(const Dataset& input, const RegressionFit& fit, bool hc1)
{
    const double n = static_cast<double>(input.n());
    const int k = input.partialled + static_cast<int>(input.controls.cols());
    if (!(fit.se_robust(0) > 0.0) || !(fit.se_robust(2) > 0.0))
        throw EstimationError("sandwich covariance is not positive definite");
    const double f1 = hc1 ? std::sqrt(n / (n - 1.0 - k)) : 1.0;
    const double f2 = hc1 ? std::sqrt(n / (n - 2.0 - k)) : 1.0;
    return {fit.theta1_hat / (fit.se_robust(0) * f1), fit.theta2_hat / (fit.se_robust(2) * f2)};
}

RegressionFit fit_logit_outcome(const Dataset& data, bool robust, bool hc1)
{
    data.validate();
    for (Eigen::Index i = 0; i < data.n(); ++i)
        if (data.y(i) != 0.0 && data.y(i) != 1.0)
            throw EstimationError("logit outcome requires y in {0, 1}");
    const double ones = data.y.sum();
    if (ones == 0.0 || ones == static_cast<double>(data.n()))
        throw EstimationError("all outcomes are equal: no maximum likelihood estimate");

    // Mediator equation by OLS on the residualized data.
    RegressionFit fit;
    {
        const Dataset r = residualize(data);
        fit_mediator(r, fit);
        if (robust) {
            const double n = static_cast<double>(r.n());
            const double f = hc1 ? std::sqrt(n / (n - 1.0 - r.partialled)) : 1.0;
            fit.t1 = fit.theta1_hat / (fit.se_robust(0) * f);
        }
    }

    const Eigen::Index n = data.n();
    const Eigen::Index p = 2 + data.controls.cols();
    Eigen::MatrixXd w(n, p);
    w.col(0) = data.x;
    w.col(1) = data.m;
    if (data.controls.cols() > 0) w.rightCols(data.controls.cols()) = data.controls;
    const Eigen::VectorXd& y = data.y;

    auto loglik = [&](const Eigen::VectorXd& beta) {
        const Eigen::ArrayXd eta = (w * beta).array();
        // log(1 + e^eta) without overflow.
        const Eigen::ArrayXd soft = eta.max(0.0) + (-eta.abs()).exp().log1p();
        return (y.array() * eta - soft).sum();
    };
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    double ll = loglik(beta);
    Eigen::MatrixXd info;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
        fit.iterations = it + 1;
        const Eigen::ArrayXd prob = 1.0 / (1.0 + (-(w * beta).array()).exp());
        const Eigen::VectorXd grad = w.transpose() * (y.array() - prob).matrix();
        const Eigen::VectorXd wt = prob * (1.0 - prob);
        info = w.transpose() * (w.array().colwise() * wt.array()).matrix();
        if (grad.norm() <= 1e-10) {
            converged = true;
            break;
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
            throw EstimationError("logit information matrix is singular");
        const Eigen::VectorXd step = ldlt.solve(grad);
        double t = 1.0;
        Eigen::VectorXd next = beta + step;
        double ll_next = loglik(next);
        for (int h = 0; h < 40 && !(ll_next >= ll - 1e-12 * std::fabs(ll)); ++h) {
            t *= 0.5;
            next = beta + t * step;
            ll_next = loglik(next);
        }
        const double moved = (next - beta).norm();
        beta = next;
        ll = ll_next;
        if (beta.norm() > 1e3) throw EstimationError("logit estimates diverge: perfect separation");
        if (moved <= 1e-14 * (1.0 + beta.norm())) {
            converged = true;
            break;
        }
    }
    if (!converged) throw EstimationError("logit Newton iterations did not converge");

    const Eigen::ArrayXd prob = 1.0 / (1.0 + (-(w * beta).array()).exp());
    info = w.transpose() * (w.array().colwise() * (prob * (1.0 - prob))).matrix();
    const Eigen::MatrixXd cov = info.inverse();
    fit.tau_hat = beta(0);
    fit.theta2_hat = beta(1);
    fit.resid2 = y - prob.matrix();
    fit.se_ordinary(1) = std::sqrt(cov(0, 0));
    fit.se_ordinary(2) = std::sqrt(cov(1, 1));
    const Eigen::MatrixXd sw = sandwich(w, fit.resid2, cov);
    const double f = hc1 ? static_cast<double>(n) / static_cast<double>(n - p) : 1.0;
    fit.se_robust(1) = std::sqrt(f * sw(0, 0));
    fit.se_robust(2) = std::sqrt(f * sw(1, 1));
    const double se2 = robust ? fit.se_robust(2) : fit.se_ordinary(2);
    if (!(se2 > 0.0) || !std::isfinite(se2)) throw EstimationError("logit covariance is degenerate");
    fit.t2 = fit.theta2_hat / se2;
    return fit;
}

std::pair<double, double> mediation_t(const Dataset& data, const MediationOptions& opts)
{
    const Dataset d = opts.intercept ? data.with_intercept() : data;
    if (opts.model == OutcomeModel::logit_outcome) {
        const RegressionFit fit = fit_logit_outcome(d, opts.se_mode == SeMode::robust, opts.hc1);
        return {fit.t1, fit.t2};
    }
    const Dataset r = residualize(d);
    const RegressionFit fit = fit_linear(r);
    if (opts.se_mode == SeMode::robust) return robust_t(r, fit, opts.hc1);
    return {fit.t1, fit.t2};
}

TestReport run_mediation_test(const Dataset& data, const MediationOptions& opts,
                              const CriticalTable& table)
{
    const auto [t1, t2] = mediation_t(data, opts);
    if (!std::isfinite(t1) || !std::isfinite(t2)) throw EstimationError("non-finite t-statistic");
    return evaluate_tests(t1, t2, opts.alpha, table, truncated_slope(opts.alpha));
}

}  // namespace medtest
