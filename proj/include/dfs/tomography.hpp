#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfs/polarization.hpp"

namespace dfs
{
/*!
 * Two-qubit analyzer setting.
 *
 * m analyzes the first qubit (B′, at D_B′) and n the second (A′, at D_A′);
 * reconstructed density matrices use the same (first, second) order.
 */
struct MeasurementSetting
{
    Pol m = Pol::H;
    Pol n = Pol::H;

    Eigen::Matrix4cd projector() const;
    bool operator==(MeasurementSetting const&) const = default;
};

//! All 36 pairs from {H,V,D,A,R,L}², grouped by basis.
std::vector<MeasurementSetting> overcomplete_settings();
//! The 16-setting minimal set of James et al.
std::vector<MeasurementSetting> minimal_settings();

struct TomographyEntry
{
    MeasurementSetting setting;
    double count = 0;
};

struct TomographyData
{
    std::vector<TomographyEntry> entries;

    double total() const;
    void validate() const;
    //! True when the settings span the 16-dimensional operator space.
    bool informationally_complete() const;
};

//! Born-rule probabilities Tr(Π ρ) for each setting.
std::vector<double> setting_probabilities(CMatrix const& rho,
                                          std::vector<MeasurementSetting> const& s);

//! Counts proportional to exact probabilities, `shots` per basis group.
TomographyData exact_data(CMatrix const& rho,
                          std::vector<MeasurementSetting> const& settings,
                          double shots);

/*!
 * Sampled counts: multinomial within each complete basis group, Poisson for
 * settings outside a complete group.
 */
TomographyData simulate_counts(PolarizationDensityMatrix const& rho,
                               std::vector<MeasurementSetting> const& settings,
                               std::uint64_t shots, std::uint64_t seed);

struct MleOptions
{
    double tol = 1e-10;
    int max_iter = 100000;
    //! Lower clamp on model probabilities inside R(ρ).
    double probability_floor = 1e-12;
    bool record_history = false;
};

struct MleResult
{
    CMatrix rho;
    int iterations = 0;
    bool converged = false;
    int diluted_steps = 0;
    std::vector<double> log_likelihood;
};

/*!
 * Iterative maximum-likelihood reconstruction.
 *
 * Fixed point ρ ← N[G⁻¹ R ρ R G⁻¹] with R = Σ f_j/p_j Π_j and G = Σ Π_j,
 * started at the maximally mixed state. A step that would lower the
 * likelihood is replaced by a diluted step ρ ← N[(I+εA)ρ(I+εA)] with
 * A = R − G/Tr(Gρ), halving ε until the likelihood does not decrease.
 */
MleResult reconstruct_mle(TomographyData const& data, MleOptions const& opts = {});

//! Least-squares linear inversion; not necessarily positive.
CMatrix reconstruct_linear(TomographyData const& data);

//! Σ f_j log(p_j / Σ_k p_k).
double log_likelihood(TomographyData const& data, CMatrix const& rho);

double fidelity_to_phi_plus(CMatrix const& rho);

struct PhaseFidelity
{
    double f_theta = 0;
    double theta_star = 0;
    //! Zero |HH⟩⟨VV| coherence; θ* is reported as 0.
    bool degenerate = false;
};

PhaseFidelity max_phase_fidelity(CMatrix const& rho);
//! Brute-force maximum over θ ∈ [−π, π] at the given step.
PhaseFidelity grid_phase_fidelity(CMatrix const& rho, double step = 1e-4);

struct BootstrapResult
{
    double f_mean = 0;
    double f_sd = 0;
    double f_theta_mean = 0;
    double f_theta_sd = 0;
    int resamples = 0;
};

//! Poisson resampling of counts, reconstruction and metric spread.
BootstrapResult bootstrap_errors(TomographyData const& data, int n_resamples,
                                 std::uint64_t seed, MleOptions const& opts = {});

}  // namespace dfs
