#include "dfs/polarization.hpp"

#include <cmath>
#include <numbers>

namespace dfs
{
namespace
{
constexpr double kHermTol = 1e-10;
constexpr double kPsdTol = 1e-10;

int qubits_for(Eigen::Index dim)
{
    int n = 0;
    Eigen::Index d = 1;
    while (d < dim)
    {
        d *= 2;
        ++n;
    }
    if (d != dim || dim < 2)
        throw DimensionError("density matrix dimension is not 2^n");
    return n;
}
}  // namespace

char to_char(Pol p)
{
    static constexpr char names[] = {'H', 'V', 'D', 'A', 'R', 'L'};
    return names[static_cast<int>(p)];
}

Pol pol_from_char(char c)
{
    switch (c)
    {
        case 'H': return Pol::H;
        case 'V': return Pol::V;
        case 'D': return Pol::D;
        case 'A': return Pol::A;
        case 'R': return Pol::R;
        case 'L': return Pol::L;
        default:
            throw std::invalid_argument(std::string("unknown polarization '")
                                        + c + "'");
    }
}

PolarizationKet PolarizationKet::of(Pol p)
{
    double const s = 1.0 / std::numbers::sqrt2;
    complex const i(0, 1);
    switch (p)
    {
        case Pol::H: return {1.0, 0.0};
        case Pol::V: return {0.0, 1.0};
        case Pol::D: return {s, s};
        case Pol::A: return {s, -s};
        case Pol::R: return {s, i * s};
        case Pol::L: return {s, -i * s};
    }
    return {};
}

PolarizationKet PolarizationKet::normalized() const
{
    double n = norm();
    if (n == 0)
        throw std::domain_error("cannot normalize a zero ket");
    return {amp_(0) / n, amp_(1) / n};
}

PolarizationKet PolarizationKet::orthogonal() const
{
    // (a, b) → (b*, −a*) up to a phase chosen so H→V, D→A, R→L.
    return {-std::conj(amp_(1)), std::conj(amp_(0))};
}

PolarizationKet PolarizationKet::conjugate() const
{
    return {std::conj(amp_(0)), std::conj(amp_(1))};
}

CVector tensor(std::vector<PolarizationKet> const& kets)
{
    CVector out = CVector::Ones(1);
    for (auto const& k : kets)
    {
        CVector next(out.size() * 2);
        for (Eigen::Index i = 0; i < out.size(); ++i)
        {
            next(2 * i) = out(i) * k.h();
            next(2 * i + 1) = out(i) * k.v();
        }
        out = std::move(next);
    }
    return out;
}

//---------------------------------------------------------------------------//

PolarizationDensityMatrix::PolarizationDensityMatrix(CMatrix m, bool heralded)
    : m_(std::move(m)), heralded_(heralded)
{
    if (m_.rows() != m_.cols())
        throw DimensionError("density matrix must be square");
    qubits_ = qubits_for(m_.rows());
    double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermTol)
        throw std::domain_error("density matrix is not Hermitian");
    double tr = m_.trace().real();
    if (heralded)
    {
        if (!(tr > 0 && tr <= 1 + kHermTol))
            throw std::domain_error("heralded trace outside (0, 1]");
    }
    else if (std::abs(tr - 1) > kHermTol)
    {
        throw std::domain_error("density matrix trace is not 1");
    }
    if (eigenvalues().minCoeff() < -kPsdTol)
        throw std::domain_error("density matrix is not positive semidefinite");
}

PolarizationDensityMatrix PolarizationDensityMatrix::pure(CVector const& ket)
{
    CVector k = ket / ket.norm();
    return PolarizationDensityMatrix(k * k.adjoint());
}

PolarizationDensityMatrix PolarizationDensityMatrix::maximally_mixed(int qubits)
{
    Eigen::Index d = Eigen::Index(1) << qubits;
    return PolarizationDensityMatrix(CMatrix::Identity(d, d) / double(d));
}

PolarizationDensityMatrix PolarizationDensityMatrix::normalized() const
{
    CMatrix m = m_ / trace();
    return PolarizationDensityMatrix(0.5 * (m + m.adjoint()));
}

Eigen::VectorXd PolarizationDensityMatrix::eigenvalues() const
{
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m_, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
}

CVector bell_phi_ket(double theta)
{
    CVector k = CVector::Zero(4);
    k(0) = 1.0 / std::numbers::sqrt2;
    k(3) = std::polar(1.0 / std::numbers::sqrt2, theta);
    return k;
}

PolarizationDensityMatrix bell_phi(double theta)
{
    return PolarizationDensityMatrix::pure(bell_phi_ket(theta));
}

double fidelity(PolarizationDensityMatrix const& rho, CVector const& target)
{
    if (target.size() != rho.dim())
        throw DimensionError("fidelity: target and state dimensions differ");
    complex f = target.dot(rho.matrix() * target);
    return f.real();
}

double trace_distance(CMatrix const& rho, CMatrix const& sigma)
{
    CMatrix diff = rho - sigma;
    Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()),
                                              Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

//---------------------------------------------------------------------------//

bool OpticalElement::is_unitary() const
{
    return kind == ElementKind::HWP || kind == ElementKind::QWP
           || kind == ElementKind::PBS || kind == ElementKind::HBS;
}

Jones waveplate_matrix(OpticalElement const& el)
{
    // Retarder with fast axis at angle a: R(a) diag(1, e^{iδ}) R(−a).
    double delta = 0;
    if (el.kind == ElementKind::HWP)
        delta = std::numbers::pi;
    else if (el.kind == ElementKind::QWP)
        delta = std::numbers::pi / 2;
    else
        throw std::invalid_argument("waveplate_matrix: not a waveplate");
    double c = std::cos(el.parameter), s = std::sin(el.parameter);
    Eigen::Matrix2cd rot;
    rot << c, -s, s, c;
    Eigen::Matrix2cd ret = Eigen::Matrix2cd::Zero();
    ret(0, 0) = 1.0;
    ret(1, 1) = std::polar(1.0, delta);
    return rot * ret * rot.transpose();
}

TwoPortField apply_element(TwoPortField const& in, OpticalElement const& el,
                           int mode_index)
{
    if (mode_index != 0 && mode_index != 1)
        throw std::out_of_range("apply_element: mode index must be 0 or 1");
    TwoPortField out = in;
    Eigen::Vector2cd& a = mode_index == 0 ? out.port0 : out.port1;
    Eigen::Vector2cd& b = mode_index == 0 ? out.port1 : out.port0;
    switch (el.kind)
    {
        case ElementKind::HWP:
        case ElementKind::QWP: a = waveplate_matrix(el) * a; break;
        case ElementKind::PBS: {
            // H transmits, V is reflected into the other port.
            Eigen::Vector2cd ta(a(0), b(1));
            Eigen::Vector2cd tb(b(0), a(1));
            a = ta;
            b = tb;
            break;
        }
        case ElementKind::HBS:
        case ElementKind::GlassPlate: {
            double r = el.kind == ElementKind::HBS ? 0.5 : el.parameter;
            if (r < 0 || r > 1)
                throw std::invalid_argument("reflectance outside [0, 1]");
            double t = std::sqrt(1 - r), rr = std::sqrt(r);
            Eigen::Vector2cd na = t * a + complex(0, rr) * b;
            Eigen::Vector2cd nb = complex(0, rr) * a + t * b;
            a = na;
            b = nb;
            break;
        }
    }
    return out;
}

namespace
{
template<class T>
void check_qubit(T const& x, int qubit, int qubits)
{
    if (qubit < 0 || qubit >= qubits || x.rows() != (Eigen::Index(1) << qubits))
        throw DimensionError("invalid qubit index or state dimension");
}

CMatrix embed(Jones const& u, int qubit, int qubits)
{
    CMatrix op = CMatrix::Identity(1, 1);
    for (int q = 0; q < qubits; ++q)
    {
        CMatrix f = q == qubit ? CMatrix(u) : CMatrix::Identity(2, 2);
        CMatrix k(op.rows() * 2, op.cols() * 2);
        for (Eigen::Index i = 0; i < op.rows(); ++i)
            for (Eigen::Index j = 0; j < op.cols(); ++j)
                k.block(2 * i, 2 * j, 2, 2) = op(i, j) * f;
        op = std::move(k);
    }
    return op;
}
}  // namespace

CMatrix apply_single_qubit(CMatrix const& rho, Jones const& u, int qubit,
                           int qubits)
{
    check_qubit(rho, qubit, qubits);
    CMatrix op = embed(u, qubit, qubits);
    return op * rho * op.adjoint();
}

CVector apply_single_qubit(CVector const& ket, Jones const& u, int qubit,
                           int qubits)
{
    check_qubit(ket, qubit, qubits);
    return embed(u, qubit, qubits) * ket;
}

//---------------------------------------------------------------------------//

FibreChannel::FibreChannel(Jones forward, FibreLabel label)
    : forward_(std::move(forward)), label_(label)
{
    Eigen::JacobiSVD<Jones> svd(forward_);
    if (svd.singularValues().maxCoeff() > 1 + 1e-12)
        throw std::domain_error("fibre Jones matrix has gain");
}

FibreChannel FibreChannel::identity(FibreLabel label)
{
    return FibreChannel(Jones::Identity(), label);
}

FibreChannel FibreChannel::random(std::mt19937_64& rng, double transmittance,
                                  FibreLabel label)
{
    if (transmittance < 0 || transmittance > 1)
        throw std::invalid_argument("transmittance outside [0, 1]");
    return FibreChannel(std::sqrt(transmittance) * haar_unitary(rng), label);
}

Jones haar_unitary(std::mt19937_64& rng)
{
    // QR of a complex Ginibre matrix with phase-fixed R diagonal.
    std::normal_distribution<double> g;
    Jones z;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            z(i, j) = complex(g(rng), g(rng));
    Eigen::HouseholderQR<Jones> qr(z);
    Jones q = qr.householderQ();
    Jones r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int k = 0; k < 2; ++k)
    {
        complex d = r(k, k);
        q.col(k) *= d / std::abs(d);
    }
    return q;
}

CVector random_ket(std::mt19937_64& rng, Eigen::Index dim)
{
    std::normal_distribution<double> g;
    CVector k(dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        k(i) = complex(g(rng), g(rng));
    return k / k.norm();
}

CMatrix random_density(std::mt19937_64& rng, Eigen::Index dim)
{
    std::normal_distribution<double> g;
    CMatrix z(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            z(i, j) = complex(g(rng), g(rng));
    CMatrix rho = z * z.adjoint();
    rho /= rho.trace().real();
    return 0.5 * (rho + rho.adjoint());
}

}  // namespace dfs
