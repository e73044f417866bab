#include "dfs/protocol.hpp"

#include <cmath>
#include <numbers>

#include "dfs/fock.hpp"

namespace dfs
{
namespace
{
constexpr int kH = 0;
constexpr int kV = 1;

// Fibre taken by each polarization at the splitting PBS.
constexpr int kUp = 0;
constexpr int kDown = 1;

int port(int fibre, int pol)
{
    return fibre * 2 + pol;
}

void expect_stage(ProtocolState const& s, Stage st, char const* what)
{
    if (s.stage != st)
        throw std::logic_error(std::string(what) + ": wrong protocol stage");
}

Eigen::Index idx3(int a, int b, int c, int db, int dc)
{
    return Eigen::Index((a * db + b) * dc + c);
}
}  // namespace

ProtocolState prepare_protocol_input()
{
    ProtocolState s;
    s.stage = Stage::Prepared;
    s.labels = {"A", "B", "R"};
    s.dims = {2, 2, 2};
    CVector phi = bell_phi_ket(0);
    s.amplitudes = CVector::Zero(8);
    double d = 1.0 / std::numbers::sqrt2;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int r = 0; r < 2; ++r)
                s.amplitudes(idx3(a, b, r, 2, 2)) = phi(a * 2 + b) * d;
    return s;
}

ProtocolState apply_collective_noise(ProtocolState const& input,
                                     FibreChannel const& up,
                                     FibreChannel const& down)
{
    expect_stage(input, Stage::Prepared, "apply_collective_noise");
    if (up.label() != FibreLabel::Up || down.label() != FibreLabel::Down)
        throw std::invalid_argument("apply_collective_noise: fibre labels swapped");

    // The same channel instance serves both directions within one round.
    Jones const fwd[2] = {up.forward(), down.forward()};
    Jones const bwd[2] = {up.backward(), down.backward()};

    ProtocolState out;
    out.stage = Stage::PostNoise;
    out.labels = {"A", "B", "R"};
    out.dims = {2, 4, 4};
    out.amplitudes = CVector::Zero(2 * 4 * 4);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int r = 0; r < 2; ++r)
            {
                complex amp = input.amplitudes(idx3(a, b, r, 2, 2));
                if (amp == 0.0)
                    continue;
                int fb = b == kH ? kUp : kDown;
                int fr = r == kH ? kUp : kDown;
                for (int jb = 0; jb < 2; ++jb)
                    for (int jr = 0; jr < 2; ++jr)
                        out.amplitudes(idx3(a, port(fb, jb), port(fr, jr), 4, 4))
                            += amp * fwd[fb](jb, b) * bwd[fr](jr, r);
            }
    return out;
}

ProtocolState post_pbs_select(ProtocolState const& state)
{
    expect_stage(state, Stage::PostNoise, "post_pbs_select");
    // Lower port: H arriving through SMF_up, V arriving through SMF_down.
    int const lower[2] = {port(kUp, kH), port(kDown, kV)};
    ProtocolState out;
    out.stage = Stage::PostPbs;
    out.labels = {"A", "B'", "R'"};
    out.dims = {2, 2, 2};
    out.amplitudes = CVector::Zero(8);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            for (int r = 0; r < 2; ++r)
                out.amplitudes(idx3(a, b, r, 2, 2))
                    = state.amplitudes(idx3(a, lower[b], lower[r], 4, 4));
    return out;
}

Eigen::Matrix4cd qpc_success_kraus()
{
    // Basis index = 2*first + second over (A, R′) in, (A′, R″) out.
    Eigen::Matrix4cd k = Eigen::Matrix4cd::Zero();
    k(2 * kH + kH, 2 * kH + kV) = 1.0;
    k(2 * kV + kV, 2 * kV + kH) = 1.0;
    return k;
}

Eigen::Matrix4cd qpc_failure_kraus()
{
    Eigen::Matrix4cd k = Eigen::Matrix4cd::Zero();
    k(2 * kH + kH, 2 * kH + kH) = 1.0;
    k(2 * kV + kV, 2 * kV + kV) = 1.0;
    return k;
}

namespace
{
//! Apply a 4×4 operator on (A, R) of a (A, B, R) qubit ket.
CVector apply_on_ar(Eigen::Matrix4cd const& op, CVector const& psi)
{
    CVector out = CVector::Zero(8);
    for (int b = 0; b < 2; ++b)
        for (int ai = 0; ai < 2; ++ai)
            for (int ri = 0; ri < 2; ++ri)
            {
                complex amp = psi(idx3(ai, b, ri, 2, 2));
                if (amp == 0.0)
                    continue;
                for (int ao = 0; ao < 2; ++ao)
                    for (int ro = 0; ro < 2; ++ro)
                        out(idx3(ao, b, ro, 2, 2))
                            += op(2 * ao + ro, 2 * ai + ri) * amp;
            }
    return out;
}

CMatrix reduced_first_two(CVector const& psi)
{
    // Trace out the third qubit of a three-qubit ket.
    CMatrix rho = CMatrix::Zero(4, 4);
    for (int r = 0; r < 2; ++r)
    {
        CVector v(4);
        for (int ab = 0; ab < 4; ++ab)
            v(ab) = psi(ab * 2 + r);
        rho += v * v.adjoint();
    }
    return rho;
}
}  // namespace

std::vector<QpcOutcome> quantum_parity_check(ProtocolState const& state)
{
    expect_stage(state, Stage::PostPbs, "quantum_parity_check");
    std::vector<QpcOutcome> outcomes;

    CVector passed = apply_on_ar(qpc_success_kraus(), state.amplitudes);
    double const s = 1.0 / std::numbers::sqrt2;
    for (Herald h : {Herald::D, Herald::A})
    {
        double sign = h == Herald::D ? 1.0 : -1.0;
        // ⟨D| or ⟨A| on R″.
        CVector cond(4);
        for (int ab = 0; ab < 4; ++ab)
            cond(ab) = s * passed(ab * 2 + kH) + sign * s * passed(ab * 2 + kV);
        QpcOutcome o;
        o.success = true;
        o.herald = h;
        o.probability = cond.squaredNorm();
        o.conditional_state = o.probability > 0
                                  ? CMatrix(cond * cond.adjoint() / o.probability)
                                  : CMatrix(CMatrix::Identity(4, 4) / 4.0);
        outcomes.push_back(std::move(o));
    }

    CVector failed = apply_on_ar(qpc_failure_kraus(), state.amplitudes);
    QpcOutcome f;
    f.success = false;
    f.probability = failed.squaredNorm();
    f.conditional_state = f.probability > 0
                              ? CMatrix(reduced_first_two(failed) / f.probability)
                              : CMatrix(CMatrix::Identity(4, 4) / 4.0);
    outcomes.push_back(std::move(f));
    return outcomes;
}

PolarizationDensityMatrix correct_phase(QpcOutcome const& outcome)
{
    if (!outcome.success)
        throw std::logic_error("correct_phase: parity check failed");
    if (outcome.herald == Herald::D)
        return PolarizationDensityMatrix(outcome.conditional_state);
    Jones z = Jones::Identity();
    z(1, 1) = -1.0;
    return PolarizationDensityMatrix(
        apply_single_qubit(outcome.conditional_state, z, 0, 2));
}

ProtocolRun run_protocol(FibreChannel const& up, FibreChannel const& down)
{
    auto post = post_pbs_select(
        apply_collective_noise(prepare_protocol_input(), up, down));
    ProtocolRun run;
    auto outcomes = quantum_parity_check(post);
    for (std::size_t i = 0; i < 2; ++i)
    {
        auto const& o = outcomes[i];
        run.branch_probability[i] = o.probability;
        run.success_probability += o.probability;
        if (o.probability > 0)
            run.fidelity[i] = fidelity(correct_phase(o), bell_phi_ket(0));
    }
    return run;
}

//---------------------------------------------------------------------------//

std::string to_string(AncillaKind k)
{
    return k == AncillaKind::SinglePhoton ? "single_photon"
                                          : "coherent_compensated";
}

namespace
{
//! Lossy fibre with |α_H|² = |β_V|² = T and random phases.
FibreChannel lossy_phase_channel(std::mt19937_64& rng, double t, FibreLabel label)
{
    std::uniform_real_distribution<double> ph(-std::numbers::pi, std::numbers::pi);
    Jones j = Jones::Zero();
    j(0, 0) = std::polar(std::sqrt(t), ph(rng));
    j(1, 1) = std::polar(std::sqrt(t), ph(rng));
    return FibreChannel(j, label);
}

/*!
 * Three-fold click probability with a coherent ancilla of mean mu arriving at
 * the parity check. Photon B reaches D_B′ with probability T and heralds a
 * single photon in mode 1; D_R″ watches 1′D and D_A′ watches both 2′H, 2′V.
 */
double coherent_threefold(double t, double mu)
{
    double herald_sum = 0;
    for (Pol m : {Pol::H, Pol::V})
    {
        SourceModel model;
        model.signal_mean = 1.0;
        model.signal_g2 = 0.0;
        model.coherent_mean = mu;
        model.herald = m;
        auto out = apply_pbs_relations(build_input_register(model));
        herald_sum += 0.5 * joint_click_probability(out, {"1'D"}, {"2'H", "2'V"}, 1.0);
    }
    return t * herald_sum;
}
}  // namespace

std::vector<ScalingRow> scaling_experiment(std::vector<double> const& grid,
                                           ScalingOptions const& opts)
{
    std::vector<ScalingRow> rows;
    for (std::size_t gi = 0; gi < grid.size(); ++gi)
    {
        double t = grid[gi];
        if (!(t > 0 && t <= 1))
            throw std::invalid_argument("scaling: transmittance outside (0, 1]");
        ScalingRow row;
        row.transmittance = t;
        row.ancilla = opts.ancilla;
        row.trials = opts.trials;
        if (opts.ancilla == AncillaKind::SinglePhoton)
        {
            double acc = 0;
            for (int trial = 0; trial < opts.trials; ++trial)
            {
                std::seed_seq seq{opts.seed, std::uint64_t(gi), std::uint64_t(trial)};
                std::mt19937_64 rng(seq);
                auto up = lossy_phase_channel(rng, t, FibreLabel::Up);
                auto down = lossy_phase_channel(rng, t, FibreLabel::Down);
                acc += run_protocol(up, down).success_probability;
            }
            row.success_rate = acc / opts.trials;
        }
        else
        {
            if (opts.mu / t > opts.max_launch_mean)
                throw std::domain_error(
                    "scaling: launch mean mu/T exceeds the truncation validity bound");
            row.success_rate = coherent_threefold(t, opts.mu);
            row.trials = 1;
        }
        rows.push_back(row);
    }
    return rows;
}

double loglog_slope(std::vector<ScalingRow> const& rows)
{
    if (rows.size() < 2)
        throw std::invalid_argument("slope needs at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double n = double(rows.size());
    for (auto const& r : rows)
    {
        double x = std::log(r.transmittance), y = std::log(r.success_rate);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace dfs
