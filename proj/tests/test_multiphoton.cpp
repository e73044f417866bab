#include <cmath>
#include <random>

#include <doctest.h>

#include "dfs/multiphoton.hpp"

using namespace dfs;

TEST_CASE("reported operating point")
{
    NoiseModelParams p{0.28, 0.018, 0.098};
    CHECK(visibility_z(p) == doctest::Approx(0.7633).epsilon(5e-4));
    CHECK(visibility_x(p) == doctest::Approx(0.7360).epsilon(5e-4));
    CHECK(predicted_fidelity(p) == doctest::Approx(0.8088).epsilon(5e-4));
}

TEST_CASE("noise-free limit")
{
    // χ_n = 0, g2 = 0: V = 2/(χ_s + 2).
    NoiseModelParams p{0.5, 0, 0};
    CHECK(visibility_z(p) == doctest::Approx(2 / 2.5).epsilon(1e-14));
    CHECK(visibility_x(p) == doctest::Approx(2 / 2.5).epsilon(1e-14));
    NoiseModelParams full{0.3, 1, 0.1};
    CHECK(visibility_z(full) == doctest::Approx(0.0));
    CHECK(predicted_fidelity(full) == doctest::Approx(0.25));
}

TEST_CASE("table visibilities agree with the closed forms")
{
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < 200; ++i)
    {
        NoiseModelParams p{0.01 + u(rng), 0.5 * u(rng), u(rng)};
        auto t = coincidence_probabilities(p, 0.01, 0.3 + 0.7 * u(rng), 0.3 + 0.7 * u(rng));
        CHECK(visibility_from_table(t, Pol::H, Pol::V) == doctest::Approx(visibility_z(p)).epsilon(1e-12));
        CHECK(visibility_from_table(t, Pol::D, Pol::A) == doctest::Approx(visibility_x(p)).epsilon(1e-12));
        CHECK(visibility_from_table(t, Pol::R, Pol::L) == doctest::Approx(visibility_x(p)).epsilon(1e-12));
        CHECK(t.size() == 36);
    }
}

TEST_CASE("general form reproduces the explicit entries")
{
    SourceMeans s{0.02, 0.001, 0.005, 0.3};
    auto e = explicit_coincidences(s, 0.8, 0.6);
    auto P = [&](Pol m, Pol n) { return coincidence_probability(m, n, s, 0.8, 0.6); };
    CHECK(P(Pol::H, Pol::H) == doctest::Approx(e.HH).epsilon(1e-13));
    CHECK(P(Pol::V, Pol::H) == doctest::Approx(e.VH).epsilon(1e-13));
    CHECK(P(Pol::V, Pol::V) == doctest::Approx(e.VV).epsilon(1e-13));
    CHECK(P(Pol::H, Pol::V) == doctest::Approx(e.HV).epsilon(1e-13));
    CHECK(P(Pol::D, Pol::D) == doctest::Approx(e.DD).epsilon(1e-13));
    CHECK(P(Pol::A, Pol::D) == doctest::Approx(e.AD).epsilon(1e-13));
    CHECK(P(Pol::A, Pol::A) == doctest::Approx(e.AA).epsilon(1e-13));
    CHECK(P(Pol::D, Pol::A) == doctest::Approx(e.DA).epsilon(1e-13));
}

TEST_CASE("visibilities fall with noise and rise toward the optimum chi_s")
{
    NoiseModelParams p{0.28, 0.0, 0.098};
    double prev = 2;
    for (double n = 0; n <= 0.5; n += 0.05)
    {
        p.chi_n = n;
        double v = visibility_z(p);
        CHECK(v < prev);
        prev = v;
    }
    NoiseModelParams q{0.28, 0.018, 0.0};
    double base = visibility_x(q);
    q.g2_s = 0.2;
    CHECK(visibility_x(q) < base);
}

TEST_CASE("transmittances cancel from the visibilities")
{
    NoiseModelParams p;
    auto a = coincidence_probabilities(p, 0.01, 1, 1);
    auto b = coincidence_probabilities(p, 0.01, 0.1, 0.2);
    for (auto const& [k, v] : a)
        CHECK(b.at(k) == doctest::Approx(v * 0.02).epsilon(1e-12));
}

TEST_CASE("parameter estimate round trip")
{
    NoiseModelParams p{0.2833, 0.01833, 0.098};
    auto s = SourceMeans::from_ratios(p, 0.012);
    for (double eta : {1.0, 0.3, 0.05})
    {
        auto c = synthesize_counts(s, eta, 80e6, 2e5);
        auto est = estimate_params(c);
        CHECK(est.params.chi_n == doctest::Approx(p.chi_n).epsilon(1e-12));
        CHECK(est.params.chi_s == doctest::Approx(p.chi_s).epsilon(1e-12));
        CHECK(est.chi_s_err > 0);
    }
    CountSummary zero;
    zero.c_hh = 10;
    CHECK_THROWS_AS(estimate_params(zero), std::domain_error);
}

TEST_CASE("parameter validation")
{
    CHECK_THROWS_AS(visibility_z({0, 0.1, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(visibility_x({0.2, -0.1, 0.1}), std::invalid_argument);
    CHECK_THROWS_AS(coincidence_probabilities({}, 0, 1, 1), std::invalid_argument);
    CountSummary c;
    c.eta_d = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
