#include <doctest.h>

#include "hdinfer/sim.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>

using namespace hdinfer;

namespace {
std::string config_path(const char* name) {
    return std::string(HDINFER_CONFIG_DIR) + "/" + name;
}
} // namespace

TEST_CASE("gen_design covariance checks") {
    SUBCASE("identity") {
        Rng rng(1);
        Eigen::MatrixXd X = gen_design(2000, 3, CovKind::Identity, 0.0, rng);
        Eigen::MatrixXd S = X.transpose() * X / 2000.0;
        CHECK((S - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() < 0.1);
    }
    SUBCASE("ar1 lag-one correlation") {
        Rng rng(2);
        Eigen::MatrixXd X = gen_design(2000, 6, CovKind::Ar1, 0.5, rng);
        double corr = 0.0;
        int pairs = 0;
        for (int j = 0; j + 1 < 6; ++j) {
            double c = (X.col(j).array() * X.col(j + 1).array()).mean();
            double v1 = X.col(j).squaredNorm() / 2000.0;
            double v2 = X.col(j + 1).squaredNorm() / 2000.0;
            corr += c / std::sqrt(v1 * v2);
            ++pairs;
        }
        CHECK(std::fabs(corr / pairs - 0.5) < 0.07);
    }
    SUBCASE("same seed reproduces the matrix") {
        Rng a(3), b(3);
        Eigen::MatrixXd X1 = gen_design(20, 4, CovKind::Ar1, 0.3, a);
        Eigen::MatrixXd X2 = gen_design(20, 4, CovKind::Ar1, 0.3, b);
        CHECK(X1 == X2);
    }
    SUBCASE("invalid rho") {
        Rng rng(4);
        CHECK_THROWS(gen_design(10, 3, CovKind::Ar1, 1.0, rng));
    }
}

TEST_CASE("gen_outcome") {
    Rng rng(5);
    Eigen::MatrixXd X = gen_design(1000, 3, CovKind::Identity, 0.0, rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(3);

    SUBCASE("logistic null mean is a half") {
        Rng r2(6);
        Eigen::VectorXd y = gen_outcome(X, beta, 0.0, ModelKind::Logistic, r2);
        CHECK(std::fabs(y.mean() - 0.5) < 0.04);
    }
    SUBCASE("noiseless hook is exact") {
        Rng r2(7);
        Eigen::VectorXd b(3);
        b << 1, -2, 0.5;
        Eigen::VectorXd y = gen_outcome(X, b, 0.3, ModelKind::Linear, r2, true);
        CHECK((y - (X * b).array().operator+(0.3).matrix()).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("same seed same outcome") {
        Rng r2(8), r3(8);
        Eigen::VectorXd y1 = gen_outcome(X, beta, 0.0, ModelKind::Logistic, r2);
        Eigen::VectorXd y2 = gen_outcome(X, beta, 0.0, ModelKind::Logistic, r3);
        CHECK(y1 == y2);
    }
}

TEST_CASE("paper-example truths are reproduced analytically") {
    auto t1 = truth_of(SimConfig::from_file(config_path("example1.cfg")));
    REQUIRE(t1.size() == 2);
    CHECK(t1[0] == doctest::Approx(1.5).epsilon(1e-12));
    CHECK(t1[1] == doctest::Approx(-1.25).epsilon(1e-12));

    auto t2 = truth_of(SimConfig::from_file(config_path("example2.cfg")));
    CHECK(t2[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(t2[1] == doctest::Approx(-2.5).epsilon(1e-12));

    auto t3 = truth_of(SimConfig::from_file(config_path("example3.cfg")));
    CHECK(std::fabs(t3[0] - 1.16) < 0.005); // paper reports 2 decimals

    auto t4 = truth_of(SimConfig::from_file(config_path("example4.cfg")));
    REQUIRE(t4.size() == 2);
    CHECK(t4[0] == doctest::Approx(2.6).epsilon(1e-12));
    CHECK(std::fabs(t4[1] - 0.2423) < 5e-5); // paper reports 4 decimals

    auto t5 = truth_of(SimConfig::from_file(config_path("example5.cfg")));
    CHECK(t5[0] == doctest::Approx(1.6).epsilon(1e-12));

    auto t6 = truth_of(SimConfig::from_file(config_path("example6.cfg")));
    CHECK(std::fabs(t6[0] - 0.3412) < 1e-12);
}

TEST_CASE("config parsing surfaces errors with location") {
    std::string path = "/tmp/hdinfer_bad_config.cfg";
    {
        std::ofstream f(path);
        f << "target = lf\nmodel = linear\nn = 100\np = 10\nloading = 1:1\nnonsense\n";
    }
    CHECK_THROWS(SimConfig::from_file(path));
    {
        std::ofstream f(path);
        f << "target = lf\nmodel = warp\nn = 100\np = 10\nloading = 1:1\n";
    }
    CHECK_THROWS(SimConfig::from_file(path));
}

TEST_CASE("run_mc basics") {
    SimConfig cfg;
    cfg.target = TargetKind::LF;
    cfg.model = ModelKind::Linear;
    cfg.n1 = 60;
    cfg.p = 8;
    cfg.beta1 = {{0, 1.0}};
    cfg.loadings = {{{0, 1.0}}};
    cfg.reps = 1;
    cfg.base_seed = 11;

    SUBCASE("one rep gives coverage zero or one") {
        McOutcome out = run_mc(cfg);
        CHECK((out.reports[0].coverage == 0.0 || out.reports[0].coverage == 1.0));
        CHECK(out.reports[0].failures == 0);
    }
    SUBCASE("stub inference reports full coverage") {
        cfg.reps = 25;
        cfg.stub_halfwidth = 0.5;
        McOutcome out = run_mc(cfg);
        CHECK(out.reports[0].coverage == 1.0);
        CHECK(out.reports[0].avg_ci_length == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("doubling reps preserves the per-rep prefix") {
        cfg.reps = 4;
        McOutcome small = run_mc(cfg);
        cfg.reps = 8;
        McOutcome big = run_mc(cfg);
        for (int r = 0; r < 4; ++r) {
            CHECK(small.records[static_cast<std::size_t>(r)].est_debias ==
                  big.records[static_cast<std::size_t>(r)].est_debias);
            CHECK(small.records[static_cast<std::size_t>(r)].ci_lower ==
                  big.records[static_cast<std::size_t>(r)].ci_lower);
        }
    }
    SUBCASE("thread count does not change the outcome") {
        cfg.reps = 6;
        setenv("HDINFER_THREADS", "1", 1);
        McOutcome one = run_mc(cfg);
        setenv("HDINFER_THREADS", "2", 1);
        McOutcome two = run_mc(cfg);
        unsetenv("HDINFER_THREADS");
        for (int r = 0; r < 6; ++r) {
            CHECK(one.records[static_cast<std::size_t>(r)].est_debias ==
                  two.records[static_cast<std::size_t>(r)].est_debias);
        }
    }
}

TEST_CASE("debiasing beats the plugin on a logistic study") {
    SimConfig cfg;
    cfg.target = TargetKind::LF;
    cfg.model = ModelKind::Logistic;
    cfg.n1 = 150;
    cfg.p = 60;
    cfg.a0_1 = -1.0;
    cfg.beta1 = {{0, 1.0}, {1, 1.0}};
    cfg.loadings = {{{0, 1.0}, {1, 1.0}}};
    cfg.reps = 10;
    cfg.base_seed = 99;
    McOutcome out = run_mc(cfg);
    REQUIRE(out.reports[0].failures < 2);
    CHECK(out.reports[0].mean_abs_bias_debias < out.reports[0].mean_abs_bias_plugin);
}

TEST_CASE("all six example configs are expressible and loadable") {
    for (const char* name : {"example1.cfg", "example2.cfg", "example3.cfg", "example4.cfg",
                             "example5.cfg", "example6.cfg", "null_calibration.cfg"}) {
        SimConfig cfg = SimConfig::from_file(config_path(name));
        CHECK(cfg.reps >= 300);
        CHECK_NOTHROW(truth_of(cfg));
    }
}
