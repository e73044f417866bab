#include <cmath>
#include <random>

#include <doctest.h>

#include "dfs/protocol.hpp"

using namespace dfs;

namespace
{
// (A, B′, R′) basis index.
int idx(int a, int b, int r)
{
    return a * 4 + b * 2 + r;
}

ProtocolState post_pbs(FibreChannel const& up, FibreChannel const& down)
{
    return post_pbs_select(apply_collective_noise(prepare_protocol_input(), up, down));
}

FibreChannel diag(complex h, complex v, FibreLabel l)
{
    Jones j = Jones::Zero();
    j(0, 0) = h;
    j(1, 1) = v;
    return FibreChannel(j, l);
}
}  // namespace

TEST_CASE("identity channels leave the input unchanged")
{
    auto in = prepare_protocol_input();
    auto out = apply_collective_noise(in, FibreChannel::identity(FibreLabel::Up),
                                      FibreChannel::identity(FibreLabel::Down));
    CHECK(out.stage == Stage::PostNoise);
    CHECK(out.norm2() == doctest::Approx(1.0).epsilon(1e-14));
    auto sel = post_pbs_select(out);
    // Lossless identity: every amplitude reaches the lower ports.
    CHECK((sel.amplitudes - in.amplitudes).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("post-PBS state with unit amplitudes")
{
    auto s = post_pbs(FibreChannel::identity(FibreLabel::Up),
                      FibreChannel::identity(FibreLabel::Down));
    CHECK(s.labels == std::vector<std::string>{"A", "B'", "R'"});
    for (int i = 0; i < 8; ++i)
    {
        bool expected = i == idx(0, 0, 0) || i == idx(1, 1, 1) || i == idx(0, 0, 1)
                        || i == idx(1, 1, 0);
        CHECK(std::abs(s.amplitudes(i) - (expected ? 0.5 : 0.0)) < 1e-15);
    }
}

TEST_CASE("diagonal lossy channels give the four post-selected terms")
{
    complex ah(0.8, 0.1), bv(0.3, -0.5);
    auto s = post_pbs(diag(ah, 0.0, FibreLabel::Up), diag(0.0, bv, FibreLabel::Down));
    CHECK(std::abs(s.amplitudes(idx(0, 0, 0)) - 0.5 * ah * ah) < 1e-15);
    CHECK(std::abs(s.amplitudes(idx(1, 1, 1)) - 0.5 * bv * bv) < 1e-15);
    CHECK(std::abs(s.amplitudes(idx(0, 0, 1)) - 0.5 * ah * bv) < 1e-15);
    CHECK(std::abs(s.amplitudes(idx(1, 1, 0)) - 0.5 * ah * bv) < 1e-15);
}

TEST_CASE("alpha_H = 1, beta_V = 0 leaves only HHH")
{
    auto s = post_pbs(diag(1.0, 0.0, FibreLabel::Up), diag(0.0, 0.0, FibreLabel::Down));
    CHECK(std::abs(s.amplitudes(idx(0, 0, 0)) - 0.5) < 1e-15);
    CHECK(s.norm2() == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("fully cross-coupled fibres leave nothing after the PBS")
{
    Jones swap;
    swap << 0, 1, 1, 0;
    auto s = post_pbs(FibreChannel(swap, FibreLabel::Up), FibreChannel(swap, FibreLabel::Down));
    CHECK(s.norm2() < 1e-30);
}

TEST_CASE("unitary channels preserve the total norm before selection")
{
    std::mt19937_64 rng(3);
    for (int i = 0; i < 50; ++i)
    {
        auto out = apply_collective_noise(prepare_protocol_input(),
                                          FibreChannel::random(rng, 1.0, FibreLabel::Up),
                                          FibreChannel::random(rng, 1.0, FibreLabel::Down));
        CHECK(out.norm2() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("swapped fibre labels are rejected")
{
    CHECK_THROWS_AS(apply_collective_noise(prepare_protocol_input(),
                                           FibreChannel::identity(FibreLabel::Down),
                                           FibreChannel::identity(FibreLabel::Up)),
                    std::invalid_argument);
}

TEST_CASE("stage order is enforced")
{
    CHECK_THROWS_AS(post_pbs_select(prepare_protocol_input()), std::logic_error);
    CHECK_THROWS_AS(quantum_parity_check(prepare_protocol_input()), std::logic_error);
}

TEST_CASE("Kraus completeness")
{
    auto k = qpc_success_kraus();
    auto kb = qpc_failure_kraus();
    Eigen::Matrix4cd sum = k.adjoint() * k + kb.adjoint() * kb;
    CHECK((sum - Eigen::Matrix4cd::Identity()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parity check on the lossless state")
{
    auto s = post_pbs(FibreChannel::identity(FibreLabel::Up),
                      FibreChannel::identity(FibreLabel::Down));
    auto out = quantum_parity_check(s);
    REQUIRE(out.size() == 3);
    CHECK(out[0].herald == Herald::D);
    CHECK(out[1].herald == Herald::A);
    CHECK(out[0].probability + out[1].probability == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(fidelity(PolarizationDensityMatrix(out[0].conditional_state), bell_phi_ket(0))
          == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fidelity(PolarizationDensityMatrix(out[1].conditional_state),
                   bell_phi_ket(std::numbers::pi))
          == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_FALSE(out[2].success);
    CHECK(out[0].probability + out[1].probability + out[2].probability
          == doctest::Approx(s.norm2()).epsilon(1e-12));
}

TEST_CASE("K annihilates an HH component on (A, R')")
{
    ProtocolState s;
    s.stage = Stage::PostPbs;
    s.labels = {"A", "B'", "R'"};
    s.dims = {2, 2, 2};
    s.amplitudes = CVector::Zero(8);
    s.amplitudes(idx(0, 0, 0)) = 1.0;
    auto out = quantum_parity_check(s);
    CHECK(out[0].probability + out[1].probability < 1e-30);
    CHECK(out[2].probability == doctest::Approx(1.0));
}

TEST_CASE("phase correction")
{
    auto s = post_pbs(FibreChannel::identity(FibreLabel::Up),
                      FibreChannel::identity(FibreLabel::Down));
    auto out = quantum_parity_check(s);
    for (int i = 0; i < 2; ++i)
        CHECK(fidelity(correct_phase(out[std::size_t(i)]), bell_phi_ket(0))
              == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(correct_phase(out[2]), std::logic_error);
}

TEST_CASE("DFS invariance and success probability over random channels")
{
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> loss(0.1, 1.0);
    for (int i = 0; i < 1000; ++i)
    {
        auto up = FibreChannel::random(rng, loss(rng), FibreLabel::Up);
        auto down = FibreChannel::random(rng, loss(rng), FibreLabel::Down);
        auto s = post_pbs(up, down);
        auto out = quantum_parity_check(s);
        double total = 0;
        for (auto const& o : out)
            total += o.probability;
        CHECK(total == doctest::Approx(s.norm2()).epsilon(1e-10));

        auto run = run_protocol(up, down);
        double expect = std::norm(up.forward()(0, 0)) * std::norm(down.forward()(1, 1)) / 2;
        CHECK(std::abs(run.success_probability - expect) < 1e-12);
        for (int b = 0; b < 2; ++b)
            if (run.branch_probability[std::size_t(b)] > 1e-14)
                CHECK(std::abs(run.fidelity[std::size_t(b)] - 1) < 1e-10);
    }
}

TEST_CASE("scaling slopes")
{
    std::vector<double> grid{1, 0.5, 0.25, 0.125, 0.0625};
    ScalingOptions o;
    auto single = scaling_experiment(grid, o);
    for (auto const& r : single)
        CHECK(r.success_rate == doctest::Approx(r.transmittance * r.transmittance / 2).epsilon(1e-12));
    CHECK(loglog_slope(single) == doctest::Approx(2.0).epsilon(0.05));

    o.ancilla = AncillaKind::CoherentCompensated;
    auto coh = scaling_experiment(grid, o);
    CHECK(loglog_slope(coh) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(coh.front().success_rate > 0);
    CHECK(single.front().success_rate / coh.front().success_rate > 1);
}

TEST_CASE("coherent launch mean beyond the bound is rejected")
{
    ScalingOptions o;
    o.ancilla = AncillaKind::CoherentCompensated;
    o.mu = 0.2;
    CHECK_THROWS_AS(scaling_experiment({1, 0.1}, o), std::domain_error);
    CHECK_THROWS_AS(scaling_experiment({0.0}, ScalingOptions{}), std::invalid_argument);
    CHECK_THROWS(loglog_slope({}));
}
