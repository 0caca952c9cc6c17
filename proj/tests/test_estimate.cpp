#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "medtest/estimate.hpp"
#include "medtest/tables.hpp"

using namespace medtest;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

Dataset make_data(int n, int k, unsigned seed, bool hetero = false)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Dataset d;
    d.x.resize(n);
    d.m.resize(n);
    d.y.resize(n);
    d.controls.resize(n, k);
    for (int j = 0; j < k; ++j) d.control_names.push_back("c" + std::to_string(j));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < k; ++j) d.controls(i, j) = z(rng);
        d.x(i) = z(rng) + (k ? 0.5 * d.controls(i, 0) : 0.0);
        const double s = hetero ? std::fabs(d.x(i)) + 0.2 : 1.0;
        d.m(i) = 1.0 + 0.3 * d.x(i) + (k ? 0.2 * d.controls(i, k - 1) : 0.0) + s * z(rng);
        d.y(i) = -0.5 + 0.4 * d.x(i) + 0.25 * d.m(i) + (k ? 0.3 * d.controls(i, 0) : 0.0) + s * z(rng);
    }
    return d;
}

struct Ols {
    VectorXd beta;
    VectorXd se;
    VectorXd se_hc0;
};

// Full-design OLS through the normal equations.
Ols ols(const MatrixXd& X, const VectorXd& y)
{
    const MatrixXd xtx_inv = (X.transpose() * X).ldlt().solve(MatrixXd::Identity(X.cols(), X.cols()));
    Ols o;
    o.beta = xtx_inv * X.transpose() * y;
    const VectorXd e = y - X * o.beta;
    const double s2 = e.squaredNorm() / static_cast<double>(X.rows() - X.cols());
    o.se = (s2 * xtx_inv.diagonal()).cwiseSqrt();
    const MatrixXd meat = X.transpose() * e.array().square().matrix().asDiagonal() * X;
    o.se_hc0 = (xtx_inv * meat * xtx_inv).diagonal().cwiseSqrt();
    return o;
}

MatrixXd design(const Dataset& d, std::initializer_list<const VectorXd*> cols)
{
    MatrixXd X(d.n(), 1 + static_cast<Eigen::Index>(cols.size()) + d.controls.cols());
    X.col(0).setOnes();
    Eigen::Index j = 1;
    for (const VectorXd* c : cols) X.col(j++) = *c;
    if (d.controls.cols()) X.rightCols(d.controls.cols()) = d.controls;
    return X;
}

}  // namespace

TEST_CASE("linear fit matches full-design OLS")
{
    for (int k : {0, 2}) {
        for (bool hetero : {false, true}) {
            const Dataset d = make_data(80, k, 3 + k, hetero);
            const Ols eq1 = ols(design(d, {&d.x}), d.m);
            const Ols eq2 = ols(design(d, {&d.x, &d.m}), d.y);

            const Dataset r = residualize(d.with_intercept());
            const RegressionFit fit = fit_linear(r);
            CHECK(fit.theta1_hat == doctest::Approx(eq1.beta(1)).epsilon(1e-10));
            CHECK(fit.tau_hat == doctest::Approx(eq2.beta(1)).epsilon(1e-10));
            CHECK(fit.theta2_hat == doctest::Approx(eq2.beta(2)).epsilon(1e-10));
            CHECK(fit.se_ordinary(0) == doctest::Approx(eq1.se(1)).epsilon(1e-10));
            CHECK(fit.se_ordinary(2) == doctest::Approx(eq2.se(2)).epsilon(1e-10));

            MediationOptions ord;
            ord.se_mode = SeMode::ordinary;
            auto [t1, t2] = mediation_t(d, ord);
            CHECK(t1 == doctest::Approx(eq1.beta(1) / eq1.se(1)).epsilon(1e-9));
            CHECK(t2 == doctest::Approx(eq2.beta(2) / eq2.se(2)).epsilon(1e-9));

            MediationOptions rob;
            std::tie(t1, t2) = mediation_t(d, rob);
            CHECK(t1 == doctest::Approx(eq1.beta(1) / eq1.se_hc0(1)).epsilon(1e-9));
            CHECK(t2 == doctest::Approx(eq2.beta(2) / eq2.se_hc0(2)).epsilon(1e-9));

            rob.hc1 = true;
            const double n = d.n();
            const double kk = 1.0 + k;
            auto [h1, h2] = mediation_t(d, rob);
            CHECK(h1 == doctest::Approx(t1 * std::sqrt((n - 1 - kk) / n)).epsilon(1e-12));
            CHECK(h2 == doctest::Approx(t2 * std::sqrt((n - 2 - kk) / n)).epsilon(1e-12));
        }
    }
}

TEST_CASE("residualizing removes the controls")
{
    const Dataset d = make_data(60, 3, 8).with_intercept();
    const Dataset r = residualize(d);
    CHECK(r.partialled == 4);
    CHECK(r.controls.cols() == 0);
    CHECK((d.controls.transpose() * r.x).norm() < 1e-10);
    CHECK((d.controls.transpose() * r.m).norm() < 1e-10);
    CHECK((d.controls.transpose() * r.y).norm() < 1e-10);
}

TEST_CASE("estimation errors")
{
    Dataset d = make_data(40, 2, 1);
    d.controls.col(1) = 2.0 * d.controls.col(0);
    try {
        mediation_t(d, {});
        FAIL("expected an error");
    } catch (const EstimationError& e) {
        CHECK(std::string(e.what()).find("c1") != std::string::npos);
    }
    Dataset col = make_data(40, 0, 2);
    col.m = 3.0 * col.x;
    CHECK_THROWS_AS(mediation_t(col, {}), EstimationError);
    Dataset tiny = make_data(4, 0, 2);
    CHECK_THROWS_AS(mediation_t(tiny, {}), EstimationError);
    Dataset nan = make_data(30, 0, 2);
    nan.y(3) = std::nan("");
    CHECK_THROWS_AS(mediation_t(nan, {}), EstimationError);
}

TEST_CASE("CSV input")
{
    std::istringstream ok("id,y,x,m,age\n1,1.5,0,2.0,30\n2,2.5,1,2.5,41\n3,0.5,0,1.0,25\n4,3,1,3.5,50\n");
    const Dataset d = read_dataset_csv(ok, {"y", "x", "m", {"age"}});
    CHECK(d.n() == 4);
    CHECK(d.m(3) == 3.5);
    CHECK(d.controls(1, 0) == 41.0);
    CHECK(d.control_names == std::vector<std::string>{"age"});
    for (const char* cell : {"", "NA", "NaN", ".", "abc"}) {
        std::istringstream bad(std::string("y,x,m\n1,2,3\n") + cell + ",1,2\n");
        CHECK_THROWS_AS(read_dataset_csv(bad, {"y", "x", "m", {}}), EstimationError);
    }
    std::istringstream missing("y,x\n1,2\n");
    CHECK_THROWS_AS(read_dataset_csv(missing, {"y", "x", "m", {}}), EstimationError);
    std::istringstream ragged("y,x,m\n1,2\n");
    CHECK_THROWS_AS(read_dataset_csv(ragged, {"y", "x", "m", {}}), EstimationError);
}

TEST_CASE("logit outcome matches an independent Newton fit")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> z;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int n = 400;
    Dataset d;
    d.x.resize(n);
    d.m.resize(n);
    d.y.resize(n);
    d.controls.resize(n, 0);
    for (int i = 0; i < n; ++i) {
        d.x(i) = i % 2;
        d.m(i) = 0.5 * d.x(i) + z(rng);
        const double eta = 0.2 + 0.3 * d.x(i) + 0.6 * d.m(i);
        d.y(i) = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
    }
    const MatrixXd X = design(d, {&d.x, &d.m});
    VectorXd beta = VectorXd::Zero(3);
    MatrixXd info;
    VectorXd p;
    for (int it = 0; it < 50; ++it) {
        p = (1.0 / (1.0 + (-(X * beta).array()).exp())).matrix();
        info = X.transpose() * (p.array() * (1 - p.array())).matrix().asDiagonal() * X;
        beta += info.ldlt().solve(X.transpose() * (d.y - p));
    }
    const MatrixXd cov = info.inverse();
    MediationOptions opts;
    opts.model = OutcomeModel::logit_outcome;
    opts.se_mode = SeMode::ordinary;
    const auto [t1, t2] = mediation_t(d, opts);
    CHECK(t2 == doctest::Approx(beta(2) / std::sqrt(cov(2, 2))).epsilon(1e-8));
    const Ols eq1 = ols(design(d, {&d.x}), d.m);
    CHECK(t1 == doctest::Approx(eq1.beta(1) / eq1.se(1)).epsilon(1e-9));

    const VectorXd e = d.y - p;
    const MatrixXd meat = X.transpose() * e.array().square().matrix().asDiagonal() * X;
    const MatrixXd sand = cov * meat * cov;
    opts.se_mode = SeMode::robust;
    const auto [r1, r2] = mediation_t(d, opts);
    CHECK(r2 == doctest::Approx(beta(2) / std::sqrt(sand(2, 2))).epsilon(1e-8));
    CHECK(r1 == doctest::Approx(eq1.beta(1) / eq1.se_hc0(1)).epsilon(1e-9));

    Dataset flat = d;
    flat.y.setZero();
    CHECK_THROWS_AS(mediation_t(flat, opts), EstimationError);
    Dataset nonbin = d;
    nonbin.y(0) = 0.5;
    CHECK_THROWS_AS(mediation_t(nonbin, opts), EstimationError);
    // Perfect separation on m.
    Dataset sep = d;
    for (int i = 0; i < n; ++i) sep.y(i) = sep.m(i) > 0.1 ? 1.0 : 0.0;
    CHECK_THROWS_AS(mediation_t(sep, opts), EstimationError);
}

TEST_CASE("mediation report")
{
    const Dataset d = make_data(200, 1, 14);
    const auto rep = run_mediation_test(d, {}, builtin_table());
    const auto [t1, t2] = mediation_t(d, {});
    CHECK(rep.t1 == t1);
    CHECK(rep.t2 == t2);
    CHECK(rep.alpha == 0.05);
}
