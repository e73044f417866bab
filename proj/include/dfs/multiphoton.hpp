#pragma once

#include <array>
#include <map>
#include <string>

#include "dfs/polarization.hpp"

namespace dfs
{
//! Ratios χ_s = s₂/s₁, χ_n = n₁/s₁ and the heralded-signal g⁽²⁾.
struct NoiseModelParams
{
    double chi_s = 0.28;
    double chi_n = 0.018;
    double g2_s = 0.098;

    void validate() const;
};

double visibility_z(NoiseModelParams const& p);
//! Also the Y-basis visibility.
double visibility_x(NoiseModelParams const& p);
//! F = (1 + V_z + 2V_x)/4.
double predicted_fidelity(NoiseModelParams const& p);

//! Absolute source means (s₁, n₁, s₂) with n₁ = χ_n s₁, s₂ = χ_s s₁.
struct SourceMeans
{
    double s1 = 0;
    double n1 = 0;
    double s2 = 0;
    double g2 = 0;

    static SourceMeans from_ratios(NoiseModelParams const& p, double s1);
};

/*!
 * The eight explicit three-fold probabilities for the H/V and D/A analyzer
 * settings. First index: herald polarization m at D_B′; second: analyzer n at
 * D_A′. D_R″ always analyzes D.
 */
struct ExplicitCoincidences
{
    double HH, VH, VV, HV, DD, AD, AA, DA;
};

ExplicitCoincidences explicit_coincidences(SourceMeans const& s, double eta1p,
                                           double eta2p);

/*!
 * Three-fold probability for any herald m and analyzer n.
 *
 * With signal in e = m* and thermal noise in e⊥ on mode 1 and the coherent
 * D pulse on mode 2, normal ordering leaves three mode-1 charge sectors:
 *   P_mn = ½η₁′η₂′[ (s₂/2)⟨n_{1,n}⟩ + |n_V|²⟨:n_{1H}n_{1V}:⟩ + |n_H|² s₂²/4 ].
 * It reproduces the explicit forms above for m, n ∈ {H, V, D, A}.
 */
double coincidence_probability(Pol herald, Pol analyzer, SourceMeans const& s,
                               double eta1p, double eta2p);

using CoincidenceTable = std::map<std::pair<Pol, Pol>, double>;

//! Full 6×6 table; the eight explicit entries come from explicit_coincidences.
CoincidenceTable coincidence_probabilities(NoiseModelParams const& p, double s1,
                                           double eta1p, double eta2p);

//! |P_aa + P_bb − P_ab − P_ba| / Σ for an analyzer basis {a, b}.
double visibility_from_table(CoincidenceTable const& t, Pol a, Pol b);

//---------------------------------------------------------------------------//

struct CountSummary
{
    double c_hh = 0;  //!< C_HH(D_R″ ∩ D_B′)
    double c_hv = 0;  //!< C_HV(D_R″ ∩ D_B′)
    double s_h_b = 0;  //!< S_H(D_B′)
    double s_h_r = 0;  //!< S_H(D_R″)
    double f = 80e6;   //!< pulse repetition rate, Hz
    double eta_d = 1;  //!< system transmittance after the PBS
    double g2_s = 0.098;

    void validate() const;
};

struct ParamEstimate
{
    double s1p = 0;
    double n1p = 0;
    double s2p = 0;
    NoiseModelParams params;
    //! First-order Poisson error on χ_n and χ_s.
    double chi_n_err = 0;
    double chi_s_err = 0;
};

ParamEstimate estimate_params(CountSummary const& counts);

//! Expected counts for known means; inverse of estimate_params.
CountSummary synthesize_counts(SourceMeans const& s, double eta_d, double f,
                               double singles_b);

}  // namespace dfs
