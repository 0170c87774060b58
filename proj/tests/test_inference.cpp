#include <doctest.h>

#include "hdinfer/inference.hpp"
#include "hdinfer/rng.hpp"
#include "hdinfer/stats.hpp"

#include <cmath>

using namespace hdinfer;

namespace {

Dataset linear_data(int n, int p, const Eigen::VectorXd& beta, double a0, std::uint64_t seed,
                    bool noiseless = false) {
    Rng rng(seed);
    Dataset d;
    d.X.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) d.X(i, j) = rng.normal();
    d.y = d.X * beta;
    d.y.array() += a0;
    if (!noiseless) {
        for (int i = 0; i < n; ++i) d.y[i] += rng.normal();
    }
    return d;
}

} // namespace

TEST_CASE("debias reduces to the plugin when residuals vanish") {
    Eigen::VectorXd beta(3);
    beta << 1, -1, 0.5;
    Dataset d = linear_data(20, 3, beta, 0.0, 1, /*noiseless=*/true);
    Eigen::VectorXd u = Eigen::VectorXd::Ones(3);
    std::vector<bool> mask(20, true);
    double est = debias_lf(d.X, d.y, beta, u, ModelKind::Linear, mask, 2.5);
    CHECK(est == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("zero direction leaves the plugin untouched") {
    Eigen::VectorXd beta(3);
    beta << 1, -1, 0.5;
    Dataset d = linear_data(20, 3, beta, 0.0, 2);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(3);
    std::vector<bool> mask(20, true);
    CHECK(debias_lf(d.X, d.y, beta, u, ModelKind::Linear, mask, 1.25) == 1.25);
    std::vector<bool> empty(20, false);
    CHECK_THROWS(debias_lf(d.X, d.y, beta, u, ModelKind::Linear, empty, 1.25));
}

TEST_CASE("OLS normal equations zero the correction") {
    int n = 50, p = 5;
    Eigen::VectorXd beta(p);
    beta << 2, -1, 0, 0.5, 1;
    Dataset d = linear_data(n, p, beta, 0.3, 3);
    Eigen::MatrixXd Xa = augment_intercept(d.X);
    Eigen::VectorXd ols = (Xa.transpose() * Xa).ldlt().solve(Xa.transpose() * d.y);
    Eigen::MatrixXd H = Xa.transpose() * Xa / n;
    Eigen::VectorXd x_new(p + 1);
    x_new << 0, 1, 1, 0, 0, 0;
    Eigen::VectorXd u = H.ldlt().solve(x_new);
    std::vector<bool> mask(static_cast<std::size_t>(n), true);
    double plugin = x_new.dot(ols);
    double est = debias_lf(Xa, d.y, ols, u, ModelKind::Linear, mask, plugin);
    CHECK(std::fabs(est - plugin) < 1e-8);
}

TEST_CASE("noise levels") {
    Eigen::VectorXd beta(3);
    beta << 1, 2, 3;
    SUBCASE("perfect linear fit gives zeros") {
        Dataset d = linear_data(15, 3, beta, 0.0, 4, /*noiseless=*/true);
        Eigen::VectorXd s = noise_levels(d.X, d.y, beta, ModelKind::Linear);
        CHECK(s.cwiseAbs().maxCoeff() < 1e-20);
    }
    SUBCASE("logistic at beta = 0 gives quarter everywhere") {
        Dataset d = linear_data(15, 3, beta, 0.0, 5);
        Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
        Eigen::VectorXd s = noise_levels(d.X, d.y, zero, ModelKind::Logistic);
        CHECK((s.array() - 0.25).abs().maxCoeff() < 1e-15);
    }
    SUBCASE("linear noise is pooled, constant across rows") {
        Dataset d = linear_data(25, 3, beta, 0.0, 6);
        Eigen::VectorXd half = beta * 0.5;
        Eigen::VectorXd s = noise_levels(d.X, d.y, half, ModelKind::Linear);
        CHECK(s.maxCoeff() - s.minCoeff() == 0.0);
    }
}

TEST_CASE("variance quadratic form") {
    SUBCASE("zero direction gives zero") {
        Eigen::MatrixXd X = Eigen::MatrixXd::Random(10, 4);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(4);
        Eigen::VectorXd noise = Eigen::VectorXd::Ones(10);
        std::vector<bool> mask(10, true);
        CHECK(variance_lf(Eigen::VectorXd::Zero(4), X, beta, ModelKind::Linear, noise, 1.1,
                          mask) == 0.0);
    }
    SUBCASE("identity design hand value") {
        int n = 6;
        Eigen::MatrixXd X = Eigen::MatrixXd::Identity(n, n);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd noise = Eigen::VectorXd::Ones(n);
        Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
        u[0] = 1.0;
        std::vector<bool> mask(static_cast<std::size_t>(n), true);
        double v = variance_lf(u, X, beta, ModelKind::Linear, noise, 1.0, mask);
        CHECK(v == doctest::Approx(1.0 / (n * n)).epsilon(1e-14));
        double v2 = variance_lf(u, X, beta, ModelKind::Linear, noise, 2.0, mask);
        CHECK(v2 == doctest::Approx(4.0 * v).epsilon(1e-14));
    }
}

TEST_CASE("lf end to end on a small linear problem") {
    int n = 120, p = 12;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[0] = 1.0;
    beta[1] = -0.5;
    Dataset d = linear_data(n, p, beta, 0.2, 7);
    Eigen::MatrixXd loadings = Eigen::MatrixXd::Zero(p, 2);
    loadings(0, 0) = 1.0;
    loadings(1, 0) = 1.0;
    loadings.col(1) = loadings.col(0); // identical columns
    LFOptions opts;
    opts.seed = 5;
    auto res = lf(d, loadings, ModelKind::Linear, opts);
    REQUIRE(res.size() == 2);

    SUBCASE("identical loadings produce identical results") {
        CHECK(res[0].est_debias == res[1].est_debias);
        CHECK(res[0].std_err == res[1].std_err);
        CHECK(res[0].ci_lower == res[1].ci_lower);
    }
    SUBCASE("CI is symmetric about the estimate") {
        for (const auto& r : res) {
            CHECK(std::fabs((r.ci_lower + r.ci_upper) / 2.0 - r.est_debias) < 1e-10);
            CHECK(r.ci_lower <= r.est_debias);
            CHECK(r.est_debias <= r.ci_upper);
            double zq = normal_quantile(1.0 - opts.alpha / 2.0);
            CHECK(std::fabs((r.ci_upper - r.ci_lower) - 2.0 * zq * r.std_err) < 1e-10);
        }
    }
    SUBCASE("p-value matches the Wald recipe") {
        for (const auto& r : res) {
            CHECK(std::fabs(r.p_value - 2.0 * (1.0 - normal_cdf(std::fabs(r.z_value)))) < 1e-8);
        }
    }
}

TEST_CASE("beta_init bypasses fitting") {
    int n = 30, p = 6;
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta[2] = 2.0;
    Dataset d = linear_data(n, p, beta, 0.0, 8);
    Eigen::VectorXd init(p + 1);
    init << 0.1, 0, 0, 1.9, 0, 0, 0;
    Eigen::MatrixXd loading = Eigen::MatrixXd::Zero(p, 1);
    loading(2, 0) = 1.0;
    LFOptions opts;
    auto res = lf(d, loading, ModelKind::Linear, opts, init);
    CHECK(res[0].est_plugin == doctest::Approx(1.9).epsilon(1e-14)); // intercept excluded
    Eigen::VectorXd bad(p);
    CHECK_THROWS(lf(d, loading, ModelKind::Linear, opts, bad));
}

TEST_CASE("large-sample linear estimate approaches OLS") {
    int n = 500, p = 5;
    Eigen::VectorXd beta(p);
    beta << 1, -1, 0.5, 0, 0.25;
    Dataset d = linear_data(n, p, beta, -0.1, 9);
    Eigen::MatrixXd loading = Eigen::MatrixXd::Zero(p, 1);
    loading(0, 0) = 1.0;
    loading(1, 0) = 1.0;
    LFOptions opts;
    opts.lambda0 = 1e-8;
    auto res = lf(d, loading, ModelKind::Linear, opts);
    Eigen::MatrixXd Xa = augment_intercept(d.X);
    Eigen::VectorXd ols = (Xa.transpose() * Xa).ldlt().solve(Xa.transpose() * d.y);
    double target = ols[1] + ols[2];
    CHECK(std::fabs(res[0].est_debias - target) < 1e-3);
}

TEST_CASE("ci_probability") {
    InferenceResult r;
    SUBCASE("degenerate interval at zero maps to a half") {
        r.est_debias = 0.0;
        r.ci_lower = 0.0;
        r.ci_upper = 0.0;
        auto [lo, hi] = ci_probability(r, ModelKind::Logistic);
        CHECK(lo == doctest::Approx(0.5).epsilon(1e-15));
        CHECK(hi == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("est 2 with unit half-width") {
        r.est_debias = 2.0;
        r.ci_lower = 1.0;
        r.ci_upper = 3.0;
        auto [lo, hi] = ci_probability(r, ModelKind::Logistic);
        CHECK(lo == doctest::Approx(0.7310585786300049).epsilon(1e-10));
        CHECK(hi == doctest::Approx(0.9525741268224334).epsilon(1e-10));
    }
    SUBCASE("linear model is rejected") {
        CHECK_THROWS(ci_probability(r, ModelKind::Linear));
    }
    SUBCASE("widening the interval never narrows the probability interval") {
        r.ci_lower = -0.5;
        r.ci_upper = 0.75;
        auto [lo1, hi1] = ci_probability(r, ModelKind::Logistic);
        r.ci_lower = -0.9;
        r.ci_upper = 1.4;
        auto [lo2, hi2] = ci_probability(r, ModelKind::Logistic);
        CHECK(lo2 <= lo1);
        CHECK(hi2 >= hi1);
    }
}

TEST_CASE("options validation") {
    LFOptions o;
    o.alpha = 0.0;
    CHECK_THROWS(o.validate());
    o = LFOptions{};
    o.rescale = 0.9;
    CHECK_THROWS(o.validate());
    o = LFOptions{};
    o.prob_filter = 0.6;
    CHECK_THROWS(o.validate());
    o = LFOptions{};
    CHECK_NOTHROW(o.validate());
}
