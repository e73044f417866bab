#include "dfs/multiphoton.hpp"

#include <cmath>
#include <stdexcept>

namespace dfs
{
void NoiseModelParams::validate() const
{
    if (!(chi_s > 0) || !(chi_n >= 0) || !(g2_s >= 0))
        throw std::invalid_argument(
            "noise model: need chi_s > 0, chi_n >= 0, g2_s >= 0");
}

double visibility_z(NoiseModelParams const& p)
{
    p.validate();
    double num = 2 * p.chi_s * (1 - p.chi_n);
    double den = 4 * p.chi_n + 2 * p.chi_s * (p.chi_n + 1) + p.chi_s * p.chi_s;
    if (den <= 0)
        throw std::domain_error("visibility_z: degenerate parameters");
    return num / den;
}

double visibility_x(NoiseModelParams const& p)
{
    p.validate();
    double num = 2 * p.chi_s * (1 - p.chi_n);
    double den = p.chi_s * p.chi_s + 2 * p.chi_n * p.chi_n + p.g2_s
                 + 2 * (p.chi_n + 1) * p.chi_s;
    if (den <= 0)
        throw std::domain_error("visibility_x: degenerate parameters");
    return num / den;
}

double predicted_fidelity(NoiseModelParams const& p)
{
    return (1 + visibility_z(p) + 2 * visibility_x(p)) / 4;
}

SourceMeans SourceMeans::from_ratios(NoiseModelParams const& p, double s1)
{
    return {s1, p.chi_n * s1, p.chi_s * s1, p.g2_s};
}

ExplicitCoincidences explicit_coincidences(SourceMeans const& s, double eta1p,
                                           double eta2p)
{
    double e = eta1p * eta2p;
    double s1 = s.s1, n1 = s.n1, s2 = s.s2, g = s.g2;
    ExplicitCoincidences c{};
    c.HH = 0.25 * e * (s1 * s2 + 0.5 * s2 * s2);
    c.VH = 0.25 * e * (n1 * s2 + 0.5 * s2 * s2);
    c.VV = 0.5 * e * (n1 * s1 + 0.5 * s1 * s2);
    c.HV = 0.5 * e * (n1 * s1 + 0.5 * n1 * s2);
    // The 4⟨·⟩ cross terms sit inside the 1/16 bracket.
    double common = s2 * s2 + s1 * s1 * g + 2 * n1 * n1;
    c.DD = e / 16 * (common + 4 * s1 * s2);
    c.AD = e / 16 * (common + 4 * n1 * s2);
    c.AA = e / 16 * (common + 4 * s1 * s2);
    c.DA = e / 16 * (common + 4 * n1 * s2);
    return c;
}

double coincidence_probability(Pol herald, Pol analyzer, SourceMeans const& s,
                               double eta1p, double eta2p)
{
    PolarizationKet e = PolarizationKet::of(herald).conjugate();
    PolarizationKet f = e.orthogonal();
    PolarizationKet n = PolarizationKet::of(analyzer);

    auto overlap2 = [](PolarizationKet const& a, PolarizationKet const& b) {
        return std::norm(a.h() * std::conj(b.h()) + a.v() * std::conj(b.v()));
    };
    double mean_n = overlap2(n, e) * s.s1 + overlap2(n, f) * s.n1;

    // a_H a_V = e_H e_V a_e² + (e_H f_V + f_H e_V) a_e a_f + f_H f_V a_f².
    double hv = std::norm(e.h() * e.v()) * s.g2 * s.s1 * s.s1
                + std::norm(e.h() * f.v() + f.h() * e.v()) * s.s1 * s.n1
                + std::norm(f.h() * f.v()) * 2 * s.n1 * s.n1;

    double bracket = 0.5 * s.s2 * mean_n + std::norm(n.v()) * hv
                     + std::norm(n.h()) * s.s2 * s.s2 / 4;
    return 0.5 * eta1p * eta2p * bracket;
}

CoincidenceTable coincidence_probabilities(NoiseModelParams const& p, double s1,
                                           double eta1p, double eta2p)
{
    p.validate();
    if (!(s1 > 0))
        throw std::invalid_argument("coincidence table: s1 must be positive");
    auto means = SourceMeans::from_ratios(p, s1);
    CoincidenceTable t;
    for (Pol m : {Pol::H, Pol::V, Pol::D, Pol::A, Pol::R, Pol::L})
        for (Pol n : {Pol::H, Pol::V, Pol::D, Pol::A, Pol::R, Pol::L})
            t[{m, n}] = coincidence_probability(m, n, means, eta1p, eta2p);
    auto ex = explicit_coincidences(means, eta1p, eta2p);
    t[{Pol::H, Pol::H}] = ex.HH;
    t[{Pol::V, Pol::H}] = ex.VH;
    t[{Pol::V, Pol::V}] = ex.VV;
    t[{Pol::H, Pol::V}] = ex.HV;
    t[{Pol::D, Pol::D}] = ex.DD;
    t[{Pol::A, Pol::D}] = ex.AD;
    t[{Pol::A, Pol::A}] = ex.AA;
    t[{Pol::D, Pol::A}] = ex.DA;
    return t;
}

double visibility_from_table(CoincidenceTable const& t, Pol a, Pol b)
{
    double same = t.at({a, a}) + t.at({b, b});
    double cross = t.at({a, b}) + t.at({b, a});
    double tot = same + cross;
    if (tot <= 0)
        throw std::domain_error("visibility: no coincidences");
    return std::abs(same - cross) / tot;
}

//---------------------------------------------------------------------------//

void CountSummary::validate() const
{
    if (c_hh < 0 || c_hv < 0 || s_h_b < 0 || s_h_r < 0)
        throw std::invalid_argument("count summary: negative count");
    if (!(f > 0))
        throw std::invalid_argument("count summary: repetition rate must be > 0");
    if (!(eta_d > 0 && eta_d <= 1))
        throw std::invalid_argument("count summary: eta_d outside (0, 1]");
}

ParamEstimate estimate_params(CountSummary const& c)
{
    c.validate();
    if (c.s_h_b <= 0)
        throw std::domain_error("estimate_params: zero singles at D_B'");
    if (c.c_hh <= 0)
        throw std::domain_error("estimate_params: zero C_HH coincidences");
    ParamEstimate e;
    e.s1p = c.c_hh / c.s_h_b;
    e.n1p = c.c_hv / c.s_h_b;
    // The D-polarized pulse is split in two at the PBS; D_R″ sees one half.
    e.s2p = 2 * c.s_h_r / c.f;
    // η_d cancels in both ratios.
    e.params.chi_n = e.n1p / e.s1p;
    e.params.chi_s = e.s2p / e.s1p;
    e.params.g2_s = c.g2_s;

    e.chi_n_err = e.params.chi_n
                  * std::sqrt((c.c_hv > 0 ? 1 / c.c_hv : 0) + 1 / c.c_hh);
    e.chi_s_err = e.params.chi_s
                  * std::sqrt((c.s_h_r > 0 ? 1 / c.s_h_r : 0) + 1 / c.c_hh
                              + 1 / c.s_h_b);
    return e;
}

CountSummary synthesize_counts(SourceMeans const& s, double eta_d, double f,
                               double singles_b)
{
    CountSummary c;
    c.s_h_b = singles_b;
    c.c_hh = s.s1 * eta_d * singles_b;
    c.c_hv = s.n1 * eta_d * singles_b;
    c.s_h_r = s.s2 * eta_d * f / 2;
    c.f = f;
    c.eta_d = eta_d;
    c.g2_s = s.g2;
    return c;
}

}  // namespace dfs
