#include <doctest.h>

#include "hdinfer/model.hpp"

#include <cmath>
#include <initializer_list>

using namespace hdinfer;

TEST_CASE("link values") {
    CHECK(link_value(ModelKind::Logistic, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(link_value(ModelKind::Linear, 3.7) == 3.7);
    // large argument: finite, essentially saturated; the complement stays
    // below 1e-20 (evaluate it from the small side)
    double f = link_value(ModelKind::Logistic, 50.0);
    CHECK(std::isfinite(f));
    CHECK(f > 1.0 - 1e-20);
    CHECK(f <= 1.0);
    double complement = std::exp(-50.0) / (1.0 + std::exp(-50.0));
    CHECK(complement < 1e-20);
    CHECK(complement > 0.0);
}

TEST_CASE("link derivative") {
    CHECK(link_derivative(ModelKind::Logistic, 0.0) == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(link_derivative(ModelKind::Linear, -2.0) == 1.0);
    // central finite difference oracle
    for (double z : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
        double h = 1e-6;
        double fd = (link_value(ModelKind::Logistic, z + h) -
                     link_value(ModelKind::Logistic, z - h)) / (2.0 * h);
        CHECK(link_derivative(ModelKind::Logistic, z) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("weights") {
    CHECK(weight(ModelKind::Logistic, 0.0) == doctest::Approx(4.0).epsilon(1e-15));
    CHECK(weight(ModelKind::LogisticAlter, 1.3) == 1.0);
    for (int z = -5; z <= 5; ++z) {
        double prod = weight(ModelKind::Logistic, z) * link_derivative(ModelKind::Logistic, z);
        CHECK(prod == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("logistic families stay in range over a wide grid") {
    for (ModelKind m : {ModelKind::Logistic, ModelKind::LogisticAlter}) {
        for (double z = -30.0; z <= 30.0; z += 0.25) {
            double f = link_value(m, z);
            double d = link_derivative(m, z);
            double w = weight(m, z);
            CHECK(f > 0.0);
            CHECK(f < 1.0);
            CHECK(d > 0.0);
            CHECK(d <= 0.25);
            CHECK(w > 0.0);
            CHECK(std::isfinite(f));
            CHECK(std::isfinite(d));
            CHECK(std::isfinite(w));
        }
    }
    for (double z = -30.0; z <= 30.0; z += 0.5) {
        double prod = weight(ModelKind::Logistic, z) * link_derivative(ModelKind::Logistic, z);
        CHECK(std::fabs(prod - 1.0) < 1e-10);
    }
}

TEST_CASE("augment_intercept") {
    Eigen::MatrixXd X(2, 2);
    X << 1, 2, 3, 4;
    Eigen::MatrixXd A = augment_intercept(X);
    CHECK(A.cols() == 3);
    CHECK(A(0, 0) == 1.0);
    CHECK(A(1, 0) == 1.0);
    CHECK(A(0, 1) == 1.0);
    CHECK(A(0, 2) == 2.0);
    CHECK(A(1, 1) == 3.0);
    CHECK(A(1, 2) == 4.0);
    // augmenting twice stacks two ones columns
    Eigen::MatrixXd AA = augment_intercept(A);
    CHECK(AA.cols() == 4);
    CHECK(AA.col(0) == AA.col(1));
}

TEST_CASE("prob_filter_mask") {
    Eigen::MatrixXd X(3, 2);
    X << 1, 0, 0, 1, 5, 5;
    Eigen::VectorXd beta(2);

    SUBCASE("threshold 0 keeps everything") {
        beta << 3, -3;
        auto mask = prob_filter_mask(X, beta, ModelKind::Logistic, 0.0);
        for (bool b : mask) CHECK(b);
    }
    SUBCASE("beta = 0 keeps everything at any threshold") {
        beta << 0, 0;
        auto mask = prob_filter_mask(X, beta, ModelKind::Logistic, 0.49);
        for (bool b : mask) CHECK(b);
    }
    SUBCASE("extreme linear predictor is filtered") {
        Eigen::MatrixXd one_row(1, 1);
        one_row << 10.0;
        Eigen::VectorXd b1(1);
        b1 << 1.0;
        auto mask = prob_filter_mask(one_row, b1, ModelKind::Logistic, 0.05);
        CHECK_FALSE(mask[0]);
    }
    SUBCASE("errors") {
        beta << 1, 1;
        CHECK_THROWS(prob_filter_mask(X, beta, ModelKind::Linear, 0.05));
        CHECK_THROWS(prob_filter_mask(X, beta, ModelKind::Logistic, 0.5));
        CHECK_THROWS(prob_filter_mask(X, beta, ModelKind::Logistic, -0.01));
    }
    SUBCASE("monotone in the threshold") {
        beta << 0.8, -0.4;
        auto loose = prob_filter_mask(X, beta, ModelKind::Logistic, 0.05);
        auto tight = prob_filter_mask(X, beta, ModelKind::Logistic, 0.3);
        for (std::size_t i = 0; i < loose.size(); ++i) {
            if (!loose[i]) CHECK_FALSE(tight[i]); // raising threshold never un-filters
        }
    }
}

TEST_CASE("dataset validation") {
    Dataset d;
    d.X = Eigen::MatrixXd::Random(5, 2);
    d.y = Eigen::VectorXd::Zero(5);
    CHECK_NOTHROW(d.validate(ModelKind::Linear));
    CHECK_NOTHROW(d.validate(ModelKind::Logistic));
    d.y[2] = 0.5;
    CHECK_NOTHROW(d.validate(ModelKind::Linear));
    CHECK_THROWS(d.validate(ModelKind::Logistic));
    d.y[2] = std::nan("");
    CHECK_THROWS(d.validate(ModelKind::Linear));
    d.y[2] = 0.0;
    d.X(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS(d.validate(ModelKind::Linear));
}

TEST_CASE("loading validation") {
    Loading l;
    l.x_new = Eigen::VectorXd::Zero(4);
    CHECK_THROWS(l.validate());
    l.x_new[1] = 1.0;
    CHECK_NOTHROW(l.validate());
}

TEST_CASE("model name round trip") {
    CHECK(model_from_string("linear") == ModelKind::Linear);
    CHECK(model_from_string("logistic") == ModelKind::Logistic);
    CHECK(model_from_string("logistic_alter") == ModelKind::LogisticAlter);
    CHECK_THROWS(model_from_string("probit"));
    CHECK(to_string(ModelKind::LogisticAlter) == "logistic_alter");
}
