#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dfs/polarization.hpp"

namespace dfs
{
/*!
 * Stages of the counter-propagating protocol.
 *
 * Mode flow: (A, B, R) → (A, B, R) over fibre ports → (A, B′, R′) → (A′, B′, R″).
 */
enum class Stage
{
    Prepared,
    PostNoise,
    PostPbs,
    PostQpc
};

//---------------------------------------------------------------------------//
/*!
 * Joint ket of photons A, B and R as they move through the protocol.
 *
 * After the fibres, photons B and R each occupy four (fibre, polarization)
 * ports, indexed fibre*2 + pol with fibre 0 = SMF_up and 1 = SMF_down. Every
 * other stage holds one qubit per photon. Amplitudes are stored row-major
 * over the subsystems in label order and are left unnormalized: the squared
 * norm is the probability weight surviving so far.
 */
struct ProtocolState
{
    Stage stage = Stage::Prepared;
    std::vector<std::string> labels;
    std::vector<int> dims;
    CVector amplitudes;

    double norm2() const { return amplitudes.squaredNorm(); }
};

//! |Φ⁺⟩_AB ⊗ |D⟩_R.
ProtocolState prepare_protocol_input();

ProtocolState apply_collective_noise(ProtocolState const& input,
                                     FibreChannel const& up,
                                     FibreChannel const& down);

//! Keeps the lower PBS ports: H from SMF_up and V from SMF_down.
ProtocolState post_pbs_select(ProtocolState const& state);

enum class Herald
{
    D,
    A
};

struct QpcOutcome
{
    bool success = false;
    Herald herald = Herald::D;
    //! Normalized two-qubit state of (A′, B′); (A, B′) for failure.
    CMatrix conditional_state;
    double probability = 0;
};

//! Kraus operator K of the successful parity check, (A,R′) → (A′,R″).
Eigen::Matrix4cd qpc_success_kraus();
//! K̄ = projector onto span{|HH⟩, |VV⟩} of (A, R′).
Eigen::Matrix4cd qpc_failure_kraus();

//! Success outcomes for heralds D and A, then the failure branch.
std::vector<QpcOutcome> quantum_parity_check(ProtocolState const& state);

//! Phase flip on A′ when the herald was A.
PolarizationDensityMatrix correct_phase(QpcOutcome const& outcome);

//! Full pipeline for one channel pair; returns post-correction outcomes.
struct ProtocolRun
{
    double success_probability = 0;
    //! Fidelity to Φ⁺ of each successful branch after correction.
    std::array<double, 2> fidelity{0, 0};
    std::array<double, 2> branch_probability{0, 0};
};

ProtocolRun run_protocol(FibreChannel const& up, FibreChannel const& down);

//---------------------------------------------------------------------------//
// Scaling with fibre transmittance
//---------------------------------------------------------------------------//

enum class AncillaKind
{
    SinglePhoton,
    CoherentCompensated
};

std::string to_string(AncillaKind k);

struct ScalingOptions
{
    AncillaKind ancilla = AncillaKind::SinglePhoton;
    //! Mean photon number arriving at the parity check; launch mean is mu/T.
    double mu = 1e-3;
    //! Largest admissible launch mean mu/T.
    double max_launch_mean = 1.0;
    int trials = 16;
    std::uint64_t seed = 1;
};

struct ScalingRow
{
    double transmittance = 0;
    AncillaKind ancilla = AncillaKind::SinglePhoton;
    double success_rate = 0;
    int trials = 0;
};

std::vector<ScalingRow> scaling_experiment(std::vector<double> const& grid,
                                           ScalingOptions const& opts);

//! Least-squares slope of log(rate) against log(T).
double loglog_slope(std::vector<ScalingRow> const& rows);

}  // namespace dfs
