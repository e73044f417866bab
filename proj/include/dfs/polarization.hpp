#pragma once

#include <complex>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dfs
{
using complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using Jones = Eigen::Matrix2cd;

//! Raised when operands do not share a Hilbert-space dimension.
class DimensionError : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

//! Polarization labels; index 0 = H, 1 = V in every ket.
enum class Pol
{
    H,
    V,
    D,
    A,
    R,
    L
};

char to_char(Pol p);
Pol pol_from_char(char c);

//---------------------------------------------------------------------------//
/*!
 * Single-photon polarization state in the (H, V) basis.
 *
 * Conventions: D = (H+V)/√2, A = (H−V)/√2, R = (H+iV)/√2, L = (H−iV)/√2.
 */
class PolarizationKet
{
  public:
    PolarizationKet() : amp_{1.0, 0.0} {}
    PolarizationKet(complex h, complex v) : amp_{h, v} {}

    static PolarizationKet of(Pol p);

    complex h() const { return amp_(0); }
    complex v() const { return amp_(1); }
    Eigen::Vector2cd const& amplitudes() const { return amp_; }

    double norm() const { return amp_.norm(); }
    PolarizationKet normalized() const;
    //! Orthogonal partner with the same handedness convention (H→V, D→A, R→L).
    PolarizationKet orthogonal() const;
    PolarizationKet conjugate() const;

  private:
    Eigen::Vector2cd amp_;
};

//! Tensor product of kets, first factor most significant.
CVector tensor(std::vector<PolarizationKet> const& kets);

//---------------------------------------------------------------------------//
/*!
 * n-qubit polarization density matrix.
 *
 * Normalized states have unit trace. Heralded (unnormalized) states carry
 * trace in (0, 1] and are flagged as such.
 */
class PolarizationDensityMatrix
{
  public:
    //! Validates Hermiticity, trace and positivity.
    explicit PolarizationDensityMatrix(CMatrix m, bool heralded = false);

    static PolarizationDensityMatrix pure(CVector const& ket);
    static PolarizationDensityMatrix maximally_mixed(int qubits);

    int qubits() const { return qubits_; }
    Eigen::Index dim() const { return m_.rows(); }
    CMatrix const& matrix() const { return m_; }
    complex operator()(Eigen::Index i, Eigen::Index j) const
    {
        return m_(i, j);
    }
    double trace() const { return m_.trace().real(); }
    bool heralded() const { return heralded_; }

    PolarizationDensityMatrix normalized() const;
    Eigen::VectorXd eigenvalues() const;

  private:
    CMatrix m_;
    int qubits_ = 0;
    bool heralded_ = false;
};

//! |Φ⁺_θ⟩ = (|HH⟩ + e^{iθ}|VV⟩)/√2.
CVector bell_phi_ket(double theta);
PolarizationDensityMatrix bell_phi(double theta);

//! ⟨ψ|ρ|ψ⟩ for a normalized pure target.
double fidelity(PolarizationDensityMatrix const& rho, CVector const& target);

//! ½ Tr|ρ − σ|.
double trace_distance(CMatrix const& rho, CMatrix const& sigma);

//---------------------------------------------------------------------------//
// Optical elements
//---------------------------------------------------------------------------//

enum class ElementKind
{
    HWP,
    QWP,
    PBS,
    HBS,
    GlassPlate
};

struct OpticalElement
{
    ElementKind kind = ElementKind::HWP;
    //! Fast-axis angle (rad) for waveplates, reflectance for a glass plate.
    double parameter = 0;

    static OpticalElement hwp(double angle) { return {ElementKind::HWP, angle}; }
    static OpticalElement qwp(double angle) { return {ElementKind::QWP, angle}; }
    static OpticalElement pbs() { return {ElementKind::PBS, 0}; }
    static OpticalElement hbs() { return {ElementKind::HBS, 0.5}; }
    static OpticalElement glass_plate(double reflectance)
    {
        return {ElementKind::GlassPlate, reflectance};
    }

    bool is_unitary() const;
};

//! Jones matrix of a waveplate (up to global phase).
Jones waveplate_matrix(OpticalElement const& el);

/*!
 * Amplitudes in two spatial ports, each with an (H, V) polarization.
 *
 * Port 0 is the input/transmitted port, port 1 the reflected port. Beam
 * splitting elements map port 0 onto both ports; waveplates act per port.
 */
struct TwoPortField
{
    Eigen::Vector2cd port0 = Eigen::Vector2cd::Zero();
    Eigen::Vector2cd port1 = Eigen::Vector2cd::Zero();

    double norm2() const { return port0.squaredNorm() + port1.squaredNorm(); }
};

//! Apply an element to the field entering port `mode_index` (0 or 1).
TwoPortField apply_element(TwoPortField const& in, OpticalElement const& el,
                           int mode_index);

//! Apply a single-qubit Jones matrix to qubit `qubit` of an n-qubit state.
CMatrix apply_single_qubit(CMatrix const& rho, Jones const& u, int qubit,
                           int qubits);
CVector apply_single_qubit(CVector const& ket, Jones const& u, int qubit,
                           int qubits);

//---------------------------------------------------------------------------//
/*!
 * Lossy polarization channel of a single fibre.
 *
 * Backward propagation uses the transpose of the forward Jones matrix.
 */
enum class FibreLabel
{
    Up,
    Down
};

class FibreChannel
{
  public:
    FibreChannel(Jones forward, FibreLabel label);

    Jones const& forward() const { return forward_; }
    Jones backward() const { return forward_.transpose(); }
    FibreLabel label() const { return label_; }

    static FibreChannel identity(FibreLabel label);
    //! Haar-random unitary scaled by √T.
    static FibreChannel random(std::mt19937_64& rng, double transmittance,
                               FibreLabel label);

  private:
    Jones forward_;
    FibreLabel label_;
};

//! Haar-distributed 2×2 unitary.
Jones haar_unitary(std::mt19937_64& rng);

//! Haar-random pure ket of dimension `dim`.
CVector random_ket(std::mt19937_64& rng, Eigen::Index dim);

//! Random full-rank density matrix (Ginibre / Hilbert–Schmidt measure).
CMatrix random_density(std::mt19937_64& rng, Eigen::Index dim);

}  // namespace dfs
