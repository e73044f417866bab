#include "dfs/tomography.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace dfs
{
namespace
{
int basis_of(Pol p)
{
    switch (p)
    {
        case Pol::H:
        case Pol::V: return 0;
        case Pol::D:
        case Pol::A: return 1;
        case Pol::R:
        case Pol::L: return 2;
    }
    return 0;
}

//! Indices of settings grouped by (basis m, basis n); only complete groups.
std::map<std::pair<int, int>, std::vector<std::size_t>>
complete_groups(std::vector<MeasurementSetting> const& settings)
{
    std::map<std::pair<int, int>, std::vector<std::size_t>> g;
    for (std::size_t i = 0; i < settings.size(); ++i)
        g[{basis_of(settings[i].m), basis_of(settings[i].n)}].push_back(i);
    for (auto it = g.begin(); it != g.end();)
    {
        bool complete = it->second.size() == 4;
        if (complete)
        {
            // Four distinct outcomes of the same basis pair.
            for (std::size_t a = 0; a < 4 && complete; ++a)
                for (std::size_t b = a + 1; b < 4; ++b)
                    if (settings[it->second[a]] == settings[it->second[b]])
                        complete = false;
        }
        it = complete ? std::next(it) : g.erase(it);
    }
    return g;
}

Eigen::Matrix4cd gram(TomographyData const& data)
{
    Eigen::Matrix4cd g = Eigen::Matrix4cd::Zero();
    for (auto const& e : data.entries)
        g += e.setting.projector();
    return g;
}

CMatrix hermitize(CMatrix const& m)
{
    return 0.5 * (m + m.adjoint());
}
}  // namespace

Eigen::Matrix4cd MeasurementSetting::projector() const
{
    CVector k = tensor({PolarizationKet::of(m), PolarizationKet::of(n)});
    return k * k.adjoint();
}

std::vector<MeasurementSetting> overcomplete_settings()
{
    std::vector<MeasurementSetting> s;
    Pol const pairs[3][2] = {{Pol::H, Pol::V}, {Pol::D, Pol::A}, {Pol::R, Pol::L}};
    for (auto const& bm : pairs)
        for (auto const& bn : pairs)
            for (Pol m : bm)
                for (Pol n : bn)
                    s.push_back({m, n});
    return s;
}

std::vector<MeasurementSetting> minimal_settings()
{
    char const* names[] = {"HH", "HV", "VV", "VH", "RH", "RV", "DV", "DH",
                           "DR", "DD", "RD", "HD", "VD", "VL", "HL", "RL"};
    std::vector<MeasurementSetting> s;
    for (char const* n : names)
        s.push_back({pol_from_char(n[0]), pol_from_char(n[1])});
    return s;
}

double TomographyData::total() const
{
    double t = 0;
    for (auto const& e : entries)
        t += e.count;
    return t;
}

void TomographyData::validate() const
{
    for (auto const& e : entries)
        if (!(e.count >= 0))
            throw std::invalid_argument("tomography data: negative count");
    if (!(total() > 0))
        throw std::invalid_argument("tomography data: no counts");
    if (!informationally_complete())
        throw std::invalid_argument(
            "tomography data: settings are not informationally complete");
}

bool TomographyData::informationally_complete() const
{
    // Rows: real-linear functionals ρ ↦ Tr(Π_j ρ) over the 16 Hermitian
    // basis elements.
    Eigen::MatrixXd a(Eigen::Index(entries.size()), 16);
    for (std::size_t j = 0; j < entries.size(); ++j)
    {
        Eigen::Matrix4cd p = entries[j].setting.projector();
        int col = 0;
        for (int r = 0; r < 4; ++r)
            for (int c = r; c < 4; ++c)
            {
                if (r == c)
                {
                    a(Eigen::Index(j), col++) = p(r, c).real();
                }
                else
                {
                    a(Eigen::Index(j), col++) = 2 * p(r, c).real();
                    a(Eigen::Index(j), col++) = -2 * p(r, c).imag();
                }
            }
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-9);
    return lu.rank() == 16;
}

std::vector<double> setting_probabilities(CMatrix const& rho,
                                          std::vector<MeasurementSetting> const& s)
{
    if (rho.rows() != 4 || rho.cols() != 4)
        throw DimensionError("tomography expects a two-qubit state");
    std::vector<double> p;
    p.reserve(s.size());
    for (auto const& st : s)
        p.push_back((st.projector() * rho).trace().real());
    return p;
}

TomographyData exact_data(CMatrix const& rho,
                          std::vector<MeasurementSetting> const& settings,
                          double shots)
{
    auto p = setting_probabilities(rho, settings);
    TomographyData d;
    for (std::size_t i = 0; i < settings.size(); ++i)
        d.entries.push_back({settings[i], shots * std::max(p[i], 0.0)});
    return d;
}

TomographyData simulate_counts(PolarizationDensityMatrix const& rho,
                               std::vector<MeasurementSetting> const& settings,
                               std::uint64_t shots, std::uint64_t seed)
{
    if (rho.qubits() != 2)
        throw DimensionError("simulate_counts expects a two-qubit state");
    if (rho.eigenvalues().minCoeff() < -1e-10)
        throw std::domain_error("simulate_counts: state is not PSD");
    auto p = setting_probabilities(rho.matrix(), settings);
    std::mt19937_64 rng(seed);

    TomographyData d;
    d.entries.resize(settings.size());
    std::vector<bool> done(settings.size(), false);
    for (auto const& [key, idx] : complete_groups(settings))
    {
        // Multinomial as a chain of conditional binomials.
        std::uint64_t left = shots;
        double mass = 1.0;
        for (std::size_t k = 0; k < idx.size(); ++k)
        {
            double pk = std::clamp(p[idx[k]], 0.0, 1.0);
            std::uint64_t c = left;
            if (k + 1 < idx.size())
            {
                double q = mass > 0 ? std::clamp(pk / mass, 0.0, 1.0) : 0.0;
                c = std::binomial_distribution<std::uint64_t>(left, q)(rng);
            }
            d.entries[idx[k]] = {settings[idx[k]], double(c)};
            left -= c;
            mass -= pk;
            done[idx[k]] = true;
        }
    }
    for (std::size_t i = 0; i < settings.size(); ++i)
    {
        if (done[i])
            continue;
        double mean = double(shots) * std::max(p[i], 0.0);
        auto c = mean > 0 ? std::poisson_distribution<std::uint64_t>(mean)(rng) : 0;
        d.entries[i] = {settings[i], double(c)};
    }
    return d;
}

double log_likelihood(TomographyData const& data, CMatrix const& rho)
{
    double tot = data.total();
    double psum = 0;
    double ll = 0;
    for (auto const& e : data.entries)
    {
        double p = (e.setting.projector() * rho).trace().real();
        psum += p;
        if (e.count > 0)
            ll += e.count / tot * std::log(std::max(p, 1e-300));
    }
    return ll - std::log(psum);
}

MleResult reconstruct_mle(TomographyData const& data, MleOptions const& opts)
{
    data.validate();
    double const tot = data.total();
    std::vector<Eigen::Matrix4cd> proj;
    std::vector<double> freq;
    for (auto const& e : data.entries)
    {
        proj.push_back(e.setting.projector());
        freq.push_back(e.count / tot);
    }
    Eigen::Matrix4cd const g = gram(data);
    Eigen::Matrix4cd const g_inv = g.inverse();

    auto r_operator = [&](CMatrix const& rho) {
        Eigen::Matrix4cd r = Eigen::Matrix4cd::Zero();
        for (std::size_t j = 0; j < proj.size(); ++j)
        {
            if (freq[j] == 0)
                continue;
            double p = (proj[j] * rho).trace().real();
            r += freq[j] / std::max(p, opts.probability_floor) * proj[j];
        }
        return r;
    };
    auto normalize = [](CMatrix m) {
        m = hermitize(m);
        return CMatrix(m / m.trace().real());
    };

    MleResult res;
    CMatrix rho = CMatrix::Identity(4, 4) / 4.0;
    double ll = log_likelihood(data, rho);
    if (opts.record_history)
        res.log_likelihood.push_back(ll);

    for (int it = 0; it < opts.max_iter; ++it)
    {
        Eigen::Matrix4cd r = r_operator(rho);
        CMatrix next = normalize(g_inv * r * rho * r * g_inv);
        double ll_next = log_likelihood(data, next);
        if (!(ll_next >= ll))
        {
            Eigen::Matrix4cd a = r - g / (g * rho).trace().real();
            Eigen::Matrix4cd id = Eigen::Matrix4cd::Identity();
            bool improved = false;
            for (double eps = 1.0; eps > 1e-12; eps *= 0.5)
            {
                Eigen::Matrix4cd step = id + eps * a;
                next = normalize(step * rho * step.adjoint());
                ll_next = log_likelihood(data, next);
                if (ll_next >= ll)
                {
                    improved = true;
                    break;
                }
            }
            ++res.diluted_steps;
            if (!improved)
            {
                // No ascent direction left at working precision.
                res.converged = true;
                break;
            }
        }
        double change = (next - rho).cwiseAbs().maxCoeff();
        rho = next;
        ll = ll_next;
        res.iterations = it + 1;
        if (opts.record_history)
            res.log_likelihood.push_back(ll);
        if (change < opts.tol)
        {
            res.converged = true;
            break;
        }
    }
    res.rho = rho;
    return res;
}

CMatrix reconstruct_linear(TomographyData const& data)
{
    data.validate();
    // Pauli basis σ_a ⊗ σ_b; ρ ∝ Σ z_k σ_k with counts n_j ≈ Σ_k z_k Tr(Π_j σ_k).
    Jones pauli[4];
    pauli[0] = Jones::Identity();
    pauli[1] << 0, 1, 1, 0;
    pauli[2] << 0, complex(0, -1), complex(0, 1), 0;
    pauli[3] << 1, 0, 0, -1;
    std::vector<CMatrix> basis;
    for (auto const& a : pauli)
        for (auto const& b : pauli)
        {
            CMatrix k(4, 4);
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    k.block(2 * i, 2 * j, 2, 2) = a(i, j) * b;
            basis.push_back(k);
        }
    Eigen::MatrixXd a(Eigen::Index(data.entries.size()), 16);
    Eigen::VectorXd y(Eigen::Index(data.entries.size()));
    for (std::size_t j = 0; j < data.entries.size(); ++j)
    {
        Eigen::Matrix4cd p = data.entries[j].setting.projector();
        for (std::size_t k = 0; k < 16; ++k)
            a(Eigen::Index(j), Eigen::Index(k)) = (p * basis[k]).trace().real();
        y(Eigen::Index(j)) = data.entries[j].count;
    }
    Eigen::VectorXd z = a.colPivHouseholderQr().solve(y);
    CMatrix rho = CMatrix::Zero(4, 4);
    for (std::size_t k = 0; k < 16; ++k)
        rho += z(Eigen::Index(k)) * basis[k];
    return hermitize(rho / rho.trace().real());
}

double fidelity_to_phi_plus(CMatrix const& rho)
{
    if (rho.rows() != 4 || rho.cols() != 4)
        throw DimensionError("fidelity_to_phi_plus expects a two-qubit state");
    CVector phi = bell_phi_ket(0);
    return phi.dot(rho * phi).real();
}

PhaseFidelity max_phase_fidelity(CMatrix const& rho)
{
    if (rho.rows() != 4 || rho.cols() != 4)
        throw DimensionError("max_phase_fidelity expects a two-qubit state");
    complex c = rho(0, 3);
    PhaseFidelity pf;
    pf.f_theta = 0.5 * (rho(0, 0).real() + rho(3, 3).real()) + std::abs(c);
    pf.degenerate = std::abs(c) == 0;
    pf.theta_star = pf.degenerate ? 0.0 : -std::arg(c);
    return pf;
}

PhaseFidelity grid_phase_fidelity(CMatrix const& rho, double step)
{
    PhaseFidelity best;
    best.f_theta = -1;
    int n = int(std::ceil(2 * std::numbers::pi / step));
    for (int i = 0; i <= n; ++i)
    {
        double theta = std::min(-std::numbers::pi + i * step, std::numbers::pi);
        CVector k = bell_phi_ket(theta);
        double f = k.dot(rho * k).real();
        if (f > best.f_theta)
        {
            best.f_theta = f;
            best.theta_star = theta;
        }
    }
    return best;
}

BootstrapResult bootstrap_errors(TomographyData const& data, int n_resamples,
                                 std::uint64_t seed, MleOptions const& opts)
{
    if (n_resamples < 100)
        throw std::invalid_argument("bootstrap needs at least 100 resamples");
    std::vector<double> f(std::size_t(n_resamples), 0.0);
    std::vector<double> ft(std::size_t(n_resamples), 0.0);

    auto work = [&](int begin, int end) {
        for (int i = begin; i < end; ++i)
        {
            std::seed_seq seq{seed, std::uint64_t(i)};
            std::mt19937_64 rng(seq);
            TomographyData resampled = data;
            for (auto& e : resampled.entries)
                e.count = e.count > 0 ? double(std::poisson_distribution<
                                            std::uint64_t>(e.count)(rng))
                                      : 0.0;
            if (!(resampled.total() > 0))
                resampled = data;
            auto r = reconstruct_mle(resampled, opts);
            f[std::size_t(i)] = fidelity_to_phi_plus(r.rho);
            ft[std::size_t(i)] = max_phase_fidelity(r.rho).f_theta;
        }
    };
    int threads = int(std::max(1u, std::min(std::thread::hardware_concurrency(), 16u)));
    std::vector<std::thread> pool;
    int chunk = (n_resamples + threads - 1) / threads;
    for (int t = 0; t < threads; ++t)
    {
        int b = t * chunk, e = std::min(n_resamples, b + chunk);
        if (b < e)
            pool.emplace_back(work, b, e);
    }
    for (auto& th : pool)
        th.join();

    auto stats = [](std::vector<double> const& v, double& mean, double& sd) {
        mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        double ss = 0;
        for (double x : v)
            ss += (x - mean) * (x - mean);
        sd = std::sqrt(ss / double(v.size() - 1));
    };
    BootstrapResult b;
    b.resamples = n_resamples;
    stats(f, b.f_mean, b.f_sd);
    stats(ft, b.f_theta_mean, b.f_theta_sd);
    return b;
}

}  // namespace dfs
