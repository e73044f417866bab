#include "dfs/fock.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

namespace dfs
{
namespace
{
std::size_t ipow(std::size_t b, std::size_t e)
{
    std::size_t r = 1;
    while (e--)
        r *= b;
    return r;
}

std::size_t stride_of(ModeRegister const& reg, int mode)
{
    return ipow(std::size_t(reg.cutoff()) + 1,
                reg.modes().size() - 1 - std::size_t(mode));
}

double factorial(int n)
{
    return std::tgamma(double(n) + 1);
}

CVector vacuum_amplitudes(std::size_t size)
{
    CVector v = CVector::Zero(Eigen::Index(size));
    v(0) = 1.0;
    return v;
}

//! Occupation-number-space state for k photons in e and j photons in f.
CVector two_pol_fock(ModeRegister const& reg, LinearMode const& e,
                     LinearMode const& f, int k, int j)
{
    CVector psi = vacuum_amplitudes(reg.size());
    for (int i = 0; i < k; ++i)
        psi = create(reg, e, psi);
    for (int i = 0; i < j; ++i)
        psi = create(reg, f, psi);
    return psi / std::sqrt(factorial(k) * factorial(j));
}

LinearMode polarization_mode(ModeRegister const& reg, std::string const& spatial,
                             PolarizationKet const& e)
{
    LinearMode m{std::vector<complex>(reg.modes().size(), 0.0)};
    m.coefficients[std::size_t(reg.mode_index(spatial + "H"))] = std::conj(e.h());
    m.coefficients[std::size_t(reg.mode_index(spatial + "V"))] = std::conj(e.v());
    return m;
}

void check_model(SourceModel const& m)
{
    if (!(m.signal_mean >= 0 && m.noise_mean >= 0 && m.coherent_mean >= 0
          && m.signal_g2 >= 0))
        throw std::invalid_argument("source model: negative parameter");
}

/*!
 * Signal ⊗ thermal-noise mixture on spatial mode 1.
 *
 * Components with k + j above the cutoff are not representable and are
 * accounted as leakage.
 */
ModeRegister heralded_at_cutoff(SourceModel const& model,
                                std::vector<double> const& signal, int cutoff)
{
    ModeRegister reg({"1H", "1V"}, cutoff);
    PolarizationKet e = PolarizationKet::of(model.herald).conjugate();
    PolarizationKet f = e.orthogonal();
    LinearMode me = polarization_mode(reg, "1", e);
    LinearMode mf = polarization_mode(reg, "1", f);
    double n = model.noise_mean;
    double kept = 0;
    for (int k = 0; k < int(signal.size()); ++k)
    {
        if (signal[std::size_t(k)] == 0)
            continue;
        for (int j = 0; k + j <= cutoff; ++j)
        {
            double q = n == 0 ? (j == 0 ? 1.0 : 0.0)
                              : std::pow(n, j) / std::pow(1 + n, j + 1);
            double w = signal[std::size_t(k)] * q;
            if (w == 0)
                break;
            reg.add_component(w, two_pol_fock(reg, me, mf, k, j));
            kept += w;
        }
    }
    reg.add_leakage(std::max(0.0, 1.0 - kept));
    return reg;
}

std::vector<double> signal_distribution(SourceModel const& m, bool wide)
{
    double s = m.signal_mean;
    double g2 = m.signal_g2 * s * s;  // ⟨n(n−1)⟩
    if (!wide)
    {
        double p2 = g2 / 2;
        double p1 = s - 2 * p2;
        double p0 = 1 - p1 - p2;
        if (p1 < -1e-15 || p0 < -1e-15)
            throw std::domain_error(
                "source model: (s1, g2) not realizable on {0,1,2} support");
        return {std::max(p0, 0.0), std::max(p1, 0.0), p2};
    }
    double p3 = g2 / 12;  // half of ⟨n(n−1)⟩ carried by the 3-photon term
    double p2 = (g2 - 6 * p3) / 2;
    double p1 = s - 2 * p2 - 3 * p3;
    double p0 = 1 - p1 - p2 - p3;
    if (p1 < -1e-15 || p0 < -1e-15)
        throw std::domain_error(
            "source model: (s1, g2) not realizable on {0,1,2,3} support");
    return {std::max(p0, 0.0), std::max(p1, 0.0), p2, p3};
}

ModeRegister heralded_auto(SourceModel const& model, FockOptions const& opts,
                           bool wide)
{
    check_model(model);
    auto signal = signal_distribution(model, wide);
    for (int c = opts.cutoff; c <= opts.max_cutoff; ++c)
    {
        auto reg = heralded_at_cutoff(model, signal, c);
        if (reg.leakage() < opts.leakage_tolerance)
            return reg;
    }
    throw TruncationError("heralded state: leakage above tolerance at max cutoff");
}

ModeRegister coherent_at_cutoff(double mean, Pol pol, std::string const& spatial,
                                int cutoff)
{
    ModeRegister reg({spatial + "H", spatial + "V"}, cutoff);
    LinearMode e = polarization_mode(reg, spatial, PolarizationKet::of(pol));
    CVector fock = vacuum_amplitudes(reg.size());
    CVector psi = CVector::Zero(Eigen::Index(reg.size()));
    double alpha = std::sqrt(mean);
    double kept = 0;
    for (int n = 0; n <= cutoff; ++n)
    {
        if (n > 0)
            fock = create(reg, e, fock) / std::sqrt(double(n));
        double c = std::exp(-mean / 2) * std::pow(alpha, n) / std::sqrt(factorial(n));
        psi += c * fock;
        kept += c * c;
    }
    reg.add_component(1.0, psi);
    reg.add_leakage(std::max(0.0, 1.0 - kept));
    return reg;
}
}  // namespace

//---------------------------------------------------------------------------//

ModeRegister::ModeRegister(std::vector<std::string> modes, int cutoff)
    : modes_(std::move(modes)), cutoff_(cutoff)
{
    if (cutoff_ < 1)
        throw std::invalid_argument("mode register: cutoff must be >= 1");
    size_ = ipow(std::size_t(cutoff_) + 1, modes_.size());
}

ModeRegister ModeRegister::vacuum(std::vector<std::string> modes, int cutoff)
{
    ModeRegister r(std::move(modes), cutoff);
    r.add_component(1.0, vacuum_amplitudes(r.size()));
    return r;
}

ModeRegister ModeRegister::product(ModeRegister const& a, ModeRegister const& b)
{
    if (a.cutoff() != b.cutoff())
        throw std::invalid_argument("mode register product: cutoffs differ");
    auto modes = a.modes();
    modes.insert(modes.end(), b.modes().begin(), b.modes().end());
    ModeRegister r(modes, a.cutoff());
    for (auto const& ca : a.components())
    {
        for (auto const& cb : b.components())
        {
            CVector v(Eigen::Index(r.size()));
            Eigen::Index nb = cb.amplitudes.size();
            for (Eigen::Index i = 0; i < ca.amplitudes.size(); ++i)
                v.segment(i * nb, nb) = ca.amplitudes(i) * cb.amplitudes;
            r.add_component(ca.weight * cb.weight, std::move(v));
        }
    }
    r.leakage_ = 1 - (1 - a.leakage()) * (1 - b.leakage());
    return r;
}

double ModeRegister::trace() const
{
    double t = 0;
    for (auto const& c : components_)
        t += c.weight * c.amplitudes.squaredNorm();
    return t;
}

int ModeRegister::mode_index(std::string const& name) const
{
    auto it = std::find(modes_.begin(), modes_.end(), name);
    if (it == modes_.end())
        throw std::out_of_range("mode register: unknown mode '" + name + "'");
    return int(it - modes_.begin());
}

void ModeRegister::add_component(double weight, CVector amplitudes)
{
    if (std::size_t(amplitudes.size()) != size_)
        throw DimensionError("mode register: component size mismatch");
    components_.push_back({weight, std::move(amplitudes)});
}

ModeRegister ModeRegister::relabeled(std::vector<std::string> modes) const
{
    if (modes.size() != modes_.size())
        throw DimensionError("relabel: mode count mismatch");
    ModeRegister r = *this;
    r.modes_ = std::move(modes);
    return r;
}

LinearMode resolve_mode(ModeRegister const& reg, std::string const& label)
{
    if (label.size() < 2)
        throw std::out_of_range("invalid mode label '" + label + "'");
    std::string spatial = label.substr(0, label.size() - 1);
    Pol p;
    try
    {
        p = pol_from_char(label.back());
    }
    catch (std::invalid_argument const&)
    {
        throw std::out_of_range("invalid mode label '" + label + "'");
    }
    return polarization_mode(reg, spatial, PolarizationKet::of(p));
}

namespace
{
//! out[idx ∓ stride] += c √n ψ[idx], walking occupation blocks of one mode.
template<bool Raise>
void ladder(ModeRegister const& reg, int mode, complex c, CVector const& psi,
            CVector& out)
{
    std::size_t const base = std::size_t(reg.cutoff()) + 1;
    std::size_t const stride = stride_of(reg, mode);
    std::size_t const block = stride * base;
    complex const* in = psi.data();
    complex* dst = out.data();
    for (std::size_t outer = 0; outer < reg.size(); outer += block)
    {
        for (std::size_t n = 1; n < base; ++n)
        {
            // Raise: |n−1⟩ → √n |n⟩; lower: |n⟩ → √n |n−1⟩.
            std::size_t from = outer + (Raise ? n - 1 : n) * stride;
            std::size_t to = outer + (Raise ? n : n - 1) * stride;
            complex f = c * std::sqrt(double(n));
            for (std::size_t i = 0; i < stride; ++i)
            {
                complex a = in[from + i];
                if (a != 0.0)
                    dst[to + i] += f * a;
            }
        }
    }
}
}  // namespace

CVector annihilate(ModeRegister const& reg, LinearMode const& b, CVector const& psi)
{
    CVector out = CVector::Zero(psi.size());
    for (std::size_t k = 0; k < b.coefficients.size(); ++k)
        if (b.coefficients[k] != 0.0)
            ladder<false>(reg, int(k), b.coefficients[k], psi, out);
    return out;
}

CVector create(ModeRegister const& reg, LinearMode const& b, CVector const& psi)
{
    CVector out = CVector::Zero(psi.size());
    for (std::size_t k = 0; k < b.coefficients.size(); ++k)
        if (b.coefficients[k] != 0.0)
            ladder<true>(reg, int(k), std::conj(b.coefficients[k]), psi, out);
    return out;
}

//---------------------------------------------------------------------------//

ModeRegister build_heralded_state(SourceModel const& model, FockOptions const& opts)
{
    return heralded_auto(model, opts, false);
}

ModeRegister build_heralded_state_wide(SourceModel const& model,
                                       FockOptions const& opts)
{
    return heralded_auto(model, opts, true);
}

ModeRegister build_coherent_state(double mean, Pol pol, std::string const& spatial,
                                  FockOptions const& opts)
{
    if (mean < 0)
        throw std::invalid_argument("coherent state: negative mean");
    for (int c = opts.cutoff; c <= opts.max_cutoff; ++c)
    {
        auto reg = coherent_at_cutoff(mean, pol, spatial, c);
        if (reg.leakage() < opts.leakage_tolerance)
            return reg;
    }
    throw TruncationError("coherent state: leakage above tolerance at max cutoff");
}

ModeRegister apply_pbs_relations(ModeRegister const& reg)
{
    std::vector<std::string> expected{"1H", "1V", "2H", "2V"};
    if (reg.modes() != expected)
        throw std::invalid_argument("PBS relations need modes 1H,1V,2H,2V");
    // Axis of input mode X carries output mode Y wherever b†_Y ↔ a†_X.
    return reg.relabeled({"1'H", "2'V", "2'H", "1'V"});
}

complex fourth_moment(ModeRegister const& reg,
                      std::array<std::string, 4> const& labels)
{
    LinearMode b0 = resolve_mode(reg, labels[0]);
    LinearMode b1 = resolve_mode(reg, labels[1]);
    LinearMode b2 = resolve_mode(reg, labels[2]);
    LinearMode b3 = resolve_mode(reg, labels[3]);
    complex total = 0;
    for (auto const& c : reg.components())
    {
        CVector left = annihilate(reg, b1, annihilate(reg, b0, c.amplitudes));
        CVector right = annihilate(reg, b2, annihilate(reg, b3, c.amplitudes));
        total += c.weight * left.dot(right);
    }
    return total;
}

complex second_moment(ModeRegister const& reg,
                      std::array<std::string, 2> const& labels)
{
    LinearMode b0 = resolve_mode(reg, labels[0]);
    LinearMode b1 = resolve_mode(reg, labels[1]);
    complex total = 0;
    for (auto const& c : reg.components())
        total += c.weight
                 * annihilate(reg, b0, c.amplitudes)
                       .dot(annihilate(reg, b1, c.amplitudes));
    return total;
}

complex antinormal_moment(ModeRegister const& reg, std::string const& label)
{
    LinearMode b = resolve_mode(reg, label);
    complex total = 0;
    for (auto const& c : reg.components())
    {
        CVector up = create(reg, b, c.amplitudes);
        total += c.weight * up.squaredNorm();
    }
    return total;
}

double no_click_probability(ModeRegister const& reg,
                            std::vector<std::string> const& labels, double eta)
{
    if (eta < 0 || eta > 1)
        throw std::invalid_argument("detector efficiency outside [0, 1]");
    std::vector<LinearMode> modes;
    for (auto const& l : labels)
        modes.push_back(resolve_mode(reg, l));

    // ⟨:exp(−η Σ n_i):⟩ = Σ_k Π_i (−η)^{k_i}/k_i! ‖Π_i b_i^{k_i} ψ‖².
    constexpr double kTermFloor = 1e-22;
    std::function<double(std::size_t, CVector const&, double)> sum
        = [&](std::size_t level, CVector const& phi, double coeff) -> double {
        if (level == modes.size())
            return coeff * phi.squaredNorm();
        double acc = 0;
        CVector cur = phi;
        double c = coeff;
        for (int k = 0;; ++k)
        {
            double n2 = cur.squaredNorm();
            if (n2 == 0 || (k > 0 && std::abs(c) * n2 < kTermFloor))
                break;
            acc += sum(level + 1, cur, c);
            cur = annihilate(reg, modes[level], cur);
            c *= -eta / double(k + 1);
        }
        return acc;
    };

    double p = 0;
    for (auto const& comp : reg.components())
        p += comp.weight * sum(0, comp.amplitudes, 1.0);
    return p;
}

double joint_click_probability(ModeRegister const& reg,
                               std::vector<std::string> const& first,
                               std::vector<std::string> const& second,
                               double eta)
{
    auto both = first;
    both.insert(both.end(), second.begin(), second.end());
    double t = reg.trace();
    return t - no_click_probability(reg, first, eta)
           - no_click_probability(reg, second, eta)
           + no_click_probability(reg, both, eta);
}

ModeRegister build_input_register(SourceModel const& model, FockOptions const& opts)
{
    check_model(model);
    auto signal = signal_distribution(model, false);
    for (int c = opts.cutoff; c <= opts.max_cutoff; ++c)
    {
        auto one = heralded_at_cutoff(model, signal, c);
        auto two = coherent_at_cutoff(model.coherent_mean, Pol::D, "2", c);
        auto joint = ModeRegister::product(one, two);
        if (joint.leakage() < opts.leakage_tolerance)
            return joint;
    }
    throw TruncationError("input register: leakage above tolerance at max cutoff");
}

namespace
{
std::string analyzer_label(Pol n)
{
    return std::string("2'") + to_char(n);
}

double coincidence_on(ModeRegister const& out, Pol analyzer, double eta)
{
    std::string a = analyzer_label(analyzer);
    complex m = fourth_moment(out, {"1'D", a, "1'D", a});
    if (std::abs(m.imag()) > 1e-10 * std::max(1.0, std::abs(m.real())))
        throw std::runtime_error("fourth moment has non-negligible imaginary part");
    return eta * m.real();
}

void check_eta(double e1, double e2)
{
    if (e1 < 0 || e1 > 1 || e2 < 0 || e2 > 1)
        throw std::invalid_argument("transmittance outside [0, 1]");
}
}  // namespace

double oracle_coincidence_probability(Pol herald, Pol analyzer, SourceModel model,
                                      double eta1p, double eta2p,
                                      FockOptions const& opts)
{
    check_eta(eta1p, eta2p);
    model.herald = herald;
    auto out = apply_pbs_relations(build_input_register(model, opts));
    return coincidence_on(out, analyzer, eta1p * eta2p);
}

OracleVisibilities oracle_visibilities(SourceModel const& base, double eta1p,
                                       double eta2p, FockOptions const& opts)
{
    check_eta(eta1p, eta2p);
    OracleVisibilities res;
    std::map<std::pair<Pol, Pol>, double> p;
    for (Pol m : {Pol::H, Pol::V, Pol::D, Pol::A, Pol::R, Pol::L})
    {
        SourceModel model = base;
        model.herald = m;
        auto in = build_input_register(model, opts);
        res.max_leakage = std::max(res.max_leakage, in.leakage());
        auto out = apply_pbs_relations(in);
        Pol partner[] = {Pol::V, Pol::H, Pol::A, Pol::D, Pol::L, Pol::R};
        for (Pol n : {m, partner[int(m)]})
            p[{m, n}] = coincidence_on(out, n, eta1p * eta2p);
    }
    auto vis = [&](Pol a, Pol b) -> std::optional<double> {
        double same = p[{a, a}] + p[{b, b}];
        double cross = p[{a, b}] + p[{b, a}];
        double tot = same + cross;
        if (tot <= 0)
            return std::nullopt;
        return std::abs(same - cross) / tot;
    };
    res.vz = vis(Pol::H, Pol::V);
    res.vx = vis(Pol::D, Pol::A);
    res.vy = vis(Pol::R, Pol::L);
    return res;
}

}  // namespace dfs
