#include <doctest.h>

#include "hdinfer/rng.hpp"

#include <cmath>

using namespace hdinfer;

TEST_CASE("rng determinism and stream independence") {
    Rng a(7), b(7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

    Rng s1 = Rng::substream(7, 1);
    Rng s2 = Rng::substream(7, 2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += s1.next_u64() == s2.next_u64() ? 1 : 0;
    CHECK(same == 0);
}

TEST_CASE("uniform stays inside (0,1)") {
    Rng r(123);
    for (int i = 0; i < 10000; ++i) {
        double u = r.uniform();
        CHECK(u > 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal moments") {
    Rng r(99);
    int n = 200000;
    double s = 0.0, ss = 0.0;
    for (int i = 0; i < n; ++i) {
        double z = r.normal();
        s += z;
        ss += z * z;
    }
    CHECK(std::fabs(s / n) < 0.01);
    CHECK(std::fabs(ss / n - 1.0) < 0.02);
}

TEST_CASE("uniform_int respects the bound") {
    Rng r(5);
    for (int i = 0; i < 1000; ++i) CHECK(r.uniform_int(7) < 7);
    CHECK_THROWS(r.uniform_int(0));
}
