#include "vav/omni.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace vav;
using Catch::Approx;

TEST_CASE("canonicalize: affine normalization onto [0,1]") {
    const Vector r = (Vector(3) << 0.0, 5.0, 10.0).finished();
    const Vector c = canonicalize(r);
    REQUIRE(c[0] == Approx(0.0));
    REQUIRE(c[1] == Approx(0.5));
    REQUIRE(c[2] == Approx(1.0));

    SECTION("idempotent") {
        REQUIRE((canonicalize(c) - c).cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-12));
    }
    SECTION("positive affine transforms share the canonical form") {
        Rng rng(310);
        for (int i = 0; i < 20; ++i) {
            const Vector raw = rng.gaussian(5);
            if (canonicalize(raw).size() == 0) continue;
            const double a = 0.1 + 5.0 * rng.uniform01();
            const double b = rng.normal() * 10.0;
            const Vector transformed = a * raw.array() + b;
            REQUIRE((canonicalize(transformed) - canonicalize(raw)).cwiseAbs().maxCoeff() ==
                    Approx(0.0).margin(1e-9));
        }
    }
    SECTION("constant rewards are rejected") {
        REQUIRE_THROWS_AS(canonicalize(Vector::Constant(4, 3.0)), Error);
    }
}

TEST_CASE("build_omni_test: gamble structure and parameter checks") {
    Rng rng(311);
    const Vector r = rng.gaussian(6);
    const double gamma = 0.9;

    SECTION("preconditions") {
        REQUIRE_THROWS_AS(build_omni_test(r, 10.1, gamma), Error); // slack >= 0.5
        REQUIRE_THROWS_AS(build_omni_test(r, 1.0, 1.0), Error);
        REQUIRE_THROWS_AS(build_omni_test(r, -1.0, gamma), Error);
    }

    SECTION("epsilon = 0 pins the gamble probability at the canonical reward") {
        const auto test = build_omni_test(r, 0.0, gamma);
        const Vector c = canonicalize(r);
        for (int s = 0; s < 6; ++s) {
            if (s == test.s_min || s == test.s_max) {
                REQUIRE(test.env_l.p(s, kOmniGamble, s) == Approx(1.0));
                continue;
            }
            REQUIRE(test.env_l.p(s, kOmniGamble, test.s_max) == Approx(c[s]));
            REQUIRE(test.env_u.p(s, kOmniGamble, test.s_max) == Approx(c[s]));
            REQUIRE(test.env_l.p(s, kOmniSelf, s) == Approx(1.0));
        }
    }

    SECTION("alpha clamps to [0,1] and is monotone in the canonical reward") {
        const auto test = build_omni_test(r, 2.0, gamma);
        const Vector c = canonicalize(r);
        for (int s = 0; s < 6; ++s) {
            if (s == test.s_min || s == test.s_max) continue;
            const double al = test.env_l.p(s, kOmniGamble, test.s_max);
            const double au = test.env_u.p(s, kOmniGamble, test.s_max);
            REQUIRE(al >= 0.0);
            REQUIRE(au <= 1.0);
            REQUIRE(al <= au);
            for (int t = 0; t < 6; ++t) {
                if (t == test.s_min || t == test.s_max) continue;
                if (c[s] <= c[t]) {
                    REQUIRE(test.env_l.p(s, kOmniGamble, test.s_max) <=
                            test.env_l.p(t, kOmniGamble, test.s_max) + 1e-12);
                    REQUIRE(test.env_u.p(s, kOmniGamble, test.s_max) <=
                            test.env_u.p(t, kOmniGamble, test.s_max) + 1e-12);
                }
            }
        }
    }
}

TEST_CASE("two-state rewards: single comparison environment") {
    const Vector r = (Vector(2) << -3.0, 7.0).finished();
    const auto test = build_omni_test(r, 0.5, 0.9);
    REQUIRE(test.two_state);

    RationalOmniRobot aligned(r);
    REQUIRE(administer_omni(test, aligned));

    RationalOmniRobot reversed((Vector(2) << 7.0, -3.0).finished());
    REQUIRE_FALSE(administer_omni(test, reversed));
}

TEST_CASE("verify_omni: aligned robots pass for any epsilon, including zero") {
    Rng rng(312);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 3 + rng.below(6);
        const Vector r = rng.gaussian(n);
        const double gamma = rng.uniform(0.8, 0.99);
        for (double eps : {0.0, 0.3, 2.0}) {
            if (eps * (1.0 - gamma) / 2.0 >= 0.5) continue;
            const auto test = build_omni_test(r, eps, gamma);
            RationalOmniRobot robot(r);
            REQUIRE(administer_omni(test, robot));

            // positive affine transformations leave the verdict unchanged
            RationalOmniRobot scaled(Vector(2.5 * r.array() + 1.0));
            REQUIRE(administer_omni(test, scaled));
        }
    }
}

TEST_CASE("verify_omni: a perturbation beyond the band fails") {
    Rng rng(313);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + rng.below(4);
        const Vector r = rng.gaussian(n);
        const double gamma = 0.9;
        const double eps = 0.5;
        const auto test = build_omni_test(r, eps, gamma);
        const double slack = eps * (1.0 - gamma) / 2.0;

        // push one interior state's canonical reward well outside the band
        Vector c = canonicalize(r);
        int target = -1;
        for (int s = 0; s < n; ++s)
            if (s != test.s_min && s != test.s_max) {
                target = s;
                break;
            }
        REQUIRE(target >= 0);
        Vector c_bad = c;
        c_bad[target] = std::min(1.0, c[target] + slack + 0.2);
        if (c_bad[target] == 1.0) c_bad[target] = std::max(0.0, c[target] - slack - 0.2);
        RationalOmniRobot robot(c_bad);
        REQUIRE_FALSE(administer_omni(test, robot));
    }
}

TEST_CASE("completeness: robots within the canonical band always pass") {
    Rng rng(314);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + rng.below(6);
        const Vector r = rng.gaussian(n);
        const double gamma = rng.uniform(0.7, 0.99);
        const double eps = rng.uniform(0.1, 2.0);
        if (eps * (1.0 - gamma) / 2.0 >= 0.5) continue;
        const auto test = build_omni_test(r, eps, gamma);
        const double slack = eps * (1.0 - gamma) / 2.0;
        const Vector c = canonicalize(r);

        // construct a reward already in canonical form within the band
        Vector c_prime = c;
        for (int s = 0; s < n; ++s) {
            if (s == test.s_min || s == test.s_max) continue; // keep the endpoints exact
            c_prime[s] = std::clamp(c[s] + rng.uniform(-slack, slack), 0.0, 1.0);
        }
        // exercise affine invariance at the same time
        RationalOmniRobot robot(Vector(3.0 * c_prime.array() - 2.0));
        REQUIRE(administer_omni(test, robot));
    }
}

TEST_CASE("family_alignment_check: identical rewards have zero worst gap") {
    Rng rng(315);
    const Vector r = rng.gaussian(5);
    const auto result = family_alignment_check(r, r, 0.0, 30, 316);
    REQUIRE(result.aligned);
    REQUIRE(result.worst_gap <= 1e-9);
}

TEST_CASE("family_alignment_check: canonical perturbations within the bound stay aligned") {
    Rng rng(317);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 4 + rng.below(4);
        const Vector r = rng.gaussian(n);
        const Vector c = canonicalize(r);
        const double eps = rng.uniform(0.2, 1.5);
        // the sampled family uses gamma <= 0.99, so this band certifies it all
        const double bound = eps * (1.0 - 0.99) / 2.0;
        Vector c_prime = c;
        for (int s = 0; s < n; ++s) c_prime[s] = std::clamp(c[s] + rng.uniform(-bound, bound), 0.0, 1.0);
        // keep the canonical endpoints so c_prime is its own canonical form
        c_prime[0] = c[0];
        for (int s = 0; s < n; ++s) {
            if (c[s] == 0.0 || c[s] == 1.0) c_prime[s] = c[s];
        }
        const auto result = family_alignment_check(r, c_prime, eps, 50,
                                                   400 + static_cast<std::uint64_t>(trial));
        REQUIRE(result.aligned);
    }
}

TEST_CASE("end to end: passing verify_omni implies family alignment at the same epsilon") {
    Rng rng(318);
    int passed = 0;
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 4 + rng.below(4);
        const Vector r_true = rng.gaussian(n);
        const double eps = rng.uniform(0.2, 2.0);
        const double gamma = 0.99; // at least the largest family discount
        const auto test = build_omni_test(r_true, eps, gamma);
        const double slack = eps * (1.0 - gamma) / 2.0;

        // alternate between draws sure to pass and wide draws that mostly fail
        const double spread = (trial % 2 == 0) ? 0.8 * slack : 3.0 * slack;
        Vector c_robot = canonicalize(r_true);
        for (int s = 0; s < n; ++s) {
            if (s == test.s_min || s == test.s_max) continue; // stay in canonical form
            c_robot[s] = std::clamp(c_robot[s] + rng.uniform(-spread, spread), 0.0, 1.0);
        }
        Vector r_robot = 2.0 * c_robot.array() + 0.5;
        RationalOmniRobot robot(r_robot);
        if (!administer_omni(test, robot)) continue;
        ++passed;
        const auto family = family_alignment_check(r_true, r_robot, eps, 40,
                                                   500 + static_cast<std::uint64_t>(trial));
        REQUIRE(family.aligned);
    }
    REQUIRE(passed >= 15);
}

TEST_CASE("omni manifest round trip") {
    Rng rng(319);
    const Vector r = rng.gaussian(5);
    const auto test = build_omni_test(r, 0.7, 0.95);
    const json manifest = omni_manifest_to_json(test, "l.json", "u.json");
    const auto round = omni_test_from_parts(manifest, test.env_l, test.env_u);
    REQUIRE(round.s_min == test.s_min);
    REQUIRE(round.s_max == test.s_max);
    REQUIRE(round.epsilon == test.epsilon);
    REQUIRE((round.canonical - test.canonical).cwiseAbs().maxCoeff() == 0.0);

    RationalOmniRobot robot(r);
    REQUIRE(administer_omni(round, robot) == administer_omni(test, robot));
}
