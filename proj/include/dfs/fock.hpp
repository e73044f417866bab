#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dfs/polarization.hpp"

namespace dfs
{
/*!
 * Truncated Fock-space state over labeled polarization modes.
 *
 * Modes are named "<spatial><pol>" with pol ∈ {H, V}, e.g. "1H", "2'V".
 * The state is a mixture of pure components, each a dense amplitude tensor
 * over occupation numbers 0..cutoff per mode, with the first mode most
 * significant. Probability weight that could not be represented under the
 * cutoff is accumulated in leakage().
 */
class ModeRegister
{
  public:
    struct Component
    {
        double weight = 0;
        CVector amplitudes;
    };

    ModeRegister(std::vector<std::string> modes, int cutoff);

    //! Vacuum on the given modes.
    static ModeRegister vacuum(std::vector<std::string> modes, int cutoff);
    //! Tensor product; modes of `a` come first.
    static ModeRegister product(ModeRegister const& a, ModeRegister const& b);

    std::vector<std::string> const& modes() const { return modes_; }
    int cutoff() const { return cutoff_; }
    std::size_t size() const { return size_; }
    std::vector<Component> const& components() const { return components_; }
    double leakage() const { return leakage_; }
    double trace() const;

    int mode_index(std::string const& name) const;

    void add_component(double weight, CVector amplitudes);
    void add_leakage(double w) { leakage_ += w; }

    //! Same amplitudes, renamed modes (operator relabeling).
    ModeRegister relabeled(std::vector<std::string> modes) const;

  private:
    std::vector<std::string> modes_;
    int cutoff_;
    std::size_t size_;
    std::vector<Component> components_;
    double leakage_ = 0;
};

/*!
 * Linear combination of register modes, b = Σ_k c_k a_k.
 *
 * A label "xP" with P ∈ {H,V,D,A,R,L} resolves to b = e_H* a_xH + e_V* a_xV
 * for the polarization vector e of P.
 */
struct LinearMode
{
    std::vector<complex> coefficients;
};

LinearMode resolve_mode(ModeRegister const& reg, std::string const& label);

//! b ψ on one amplitude tensor.
CVector annihilate(ModeRegister const& reg, LinearMode const& b,
                   CVector const& psi);
//! b† ψ; amplitudes pushed above the cutoff are dropped.
CVector create(ModeRegister const& reg, LinearMode const& b, CVector const& psi);

//---------------------------------------------------------------------------//
/*!
 * Source parameters for the heralded signal/noise state and coherent ancilla.
 */
struct SourceModel
{
    double signal_mean = 0;  //!< s₁
    double signal_g2 = 0;    //!< g⁽²⁾_s
    double noise_mean = 0;   //!< n₁, thermal
    double coherent_mean = 0;  //!< s₂
    //! Herald polarization m at D_B′; the signal is m* and noise ⟂ m*.
    Pol herald = Pol::H;
};

struct FockOptions
{
    int cutoff = 10;
    int max_cutoff = 40;
    double leakage_tolerance = 1e-10;
};

//! Raised when the requested state cannot be held under the maximum cutoff.
class TruncationError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/*!
 * Mode-1 state on {1H, 1V}: signal in m* as a diagonal {0,1,2}-Fock
 * mixture with p₂ = g⁽²⁾ s₁²/2, p₁ = s₁ − 2p₂, times a thermal noise state
 * of mean n₁ in the orthogonal polarization.
 */
ModeRegister build_heralded_state(SourceModel const& model,
                                  FockOptions const& opts = {});

//! Same moments realized on {0,1,2,3} support (alternative construction).
ModeRegister build_heralded_state_wide(SourceModel const& model,
                                       FockOptions const& opts = {});

//! Coherent state of mean s₂ in polarization `pol` on {<spatial>H, <spatial>V}.
ModeRegister build_coherent_state(double mean, Pol pol,
                                  std::string const& spatial = "2",
                                  FockOptions const& opts = {});

//! Output modes 1′, 2′ of the parity-check PBS:
//! 1′H ← 1H, 1′V ← 2V, 2′H ← 2H, 2′V ← 1V.
ModeRegister apply_pbs_relations(ModeRegister const& reg);

//! Normally ordered ⟨b†_0 b†_1 b_2 b_3⟩.
complex fourth_moment(ModeRegister const& reg,
                      std::array<std::string, 4> const& labels);
//! ⟨b†_0 b_1⟩.
complex second_moment(ModeRegister const& reg,
                      std::array<std::string, 2> const& labels);
//! ⟨b b†⟩ (anti-normally ordered), for commutator bookkeeping.
complex antinormal_moment(ModeRegister const& reg, std::string const& label);

//! Probability that no photon is registered in any of `labels` (orthogonal
//! modes) by detectors of efficiency eta.
double no_click_probability(ModeRegister const& reg,
                            std::vector<std::string> const& labels, double eta);

/*!
 * Joint click probability of two threshold detectors, each watching a set of
 * orthogonal modes, with 1 − exp saturation.
 */
double joint_click_probability(ModeRegister const& reg,
                               std::vector<std::string> const& first,
                               std::vector<std::string> const& second,
                               double eta);

//! Input register (1H,1V,2H,2V) for herald m; cutoff raised until leakage is
//! below tolerance.
ModeRegister build_input_register(SourceModel const& model,
                                  FockOptions const& opts = {});

/*!
 * P_mn = η₁′η₂′ ⟨b†_{1′D} b†_{2′n} b_{1′D} b_{2′n}⟩ evaluated on the
 * truncated state; D_R″ analyzes D on 1′, D_A′ analyzes n on 2′.
 */
double oracle_coincidence_probability(Pol herald, Pol analyzer,
                                      SourceModel model, double eta1p,
                                      double eta2p,
                                      FockOptions const& opts = {});

struct OracleVisibilities
{
    std::optional<double> vz;
    std::optional<double> vx;
    std::optional<double> vy;
    double max_leakage = 0;
};

//! Visibilities from oracle P_mn; 0/0 is reported as undefined.
OracleVisibilities oracle_visibilities(SourceModel const& base, double eta1p,
                                       double eta2p,
                                       FockOptions const& opts = {});

}  // namespace dfs
