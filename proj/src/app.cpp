#include "dfs/app.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

#include "dfs/fock.hpp"
#include "dfs/multiphoton.hpp"
#include "dfs/version.hpp"

namespace dfs
{
namespace
{
std::string num(double v, int digits = 10)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

std::string opt_num(std::optional<double> const& v)
{
    return v ? num(*v) : std::string("undefined");
}

std::ofstream open_out(std::filesystem::path const& p)
{
    std::ofstream f(p);
    if (!f)
        throw std::runtime_error("cannot write " + p.string());
    return f;
}
}  // namespace

std::string header_line(RunConfig const& c, std::string const& command)
{
    return std::string("# dfs ") + kVersion + " " + command + " config_hash=" + c.hash()
           + " seed=" + std::to_string(c.seed);
}

//---------------------------------------------------------------------------//

PredictResult run_predict(RunConfig const& c)
{
    PredictResult r;
    r.params = c.noise;
    if (c.counts)
    {
        r.estimate = estimate_params(*c.counts);
        r.params = r.estimate->params;
    }
    r.vz = visibility_z(r.params);
    r.vx = visibility_x(r.params);
    r.vy = r.vx;
    r.fidelity = predicted_fidelity(r.params);
    return r;
}

void write_predict(std::ostream& os, RunConfig const& c, PredictResult const& r)
{
    os << header_line(c, "predict") << "\nquantity,value\n";
    if (r.estimate)
    {
        os << "s1p," << num(r.estimate->s1p) << "\n";
        os << "n1p," << num(r.estimate->n1p) << "\n";
        os << "s2p," << num(r.estimate->s2p) << "\n";
        os << "chi_n_err," << num(r.estimate->chi_n_err) << "\n";
        os << "chi_s_err," << num(r.estimate->chi_s_err) << "\n";
    }
    os << "chi_s," << num(r.params.chi_s) << "\n";
    os << "chi_n," << num(r.params.chi_n) << "\n";
    os << "g2_s," << num(r.params.g2_s) << "\n";
    os << "V_z," << num(r.vz) << "\n";
    os << "V_x," << num(r.vx) << "\n";
    os << "V_y," << num(r.vy) << "\n";
    os << "F," << num(r.fidelity) << "\n";
}

//---------------------------------------------------------------------------//

OracleReport run_oracle(RunConfig const& c)
{
    auto const& o = c.oracle;
    std::seed_seq seq{c.seed, std::uint64_t(0x6f7261636c65)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0, 1);

    std::vector<NoiseModelParams> points{c.noise};
    while (int(points.size()) < o.points)
    {
        NoiseModelParams p;
        p.chi_s = o.chi_s_min + (o.chi_s_max - o.chi_s_min) * u(rng);
        p.chi_n = o.chi_n_max * u(rng);
        p.g2_s = o.g2_max * u(rng);
        points.push_back(p);
    }
    if (o.include_degenerate)
        points.push_back({0, c.noise.chi_n, c.noise.g2_s});

    FockOptions fo;
    fo.cutoff = o.cutoff;
    OracleReport rep;
    for (auto const& p : points)
    {
        SourceModel m;
        m.signal_mean = o.s1;
        m.signal_g2 = p.g2_s;
        m.noise_mean = p.chi_n * o.s1;
        m.coherent_mean = p.chi_s * o.s1;
        auto v = oracle_visibilities(m, o.eta1, o.eta2, fo);
        OracleRow row{p.chi_s, p.chi_n, p.g2_s, v.vz, v.vx, v.vy, {}, {}, v.max_leakage};
        if (p.chi_s > 0)
        {
            row.vz_closed = visibility_z(p);
            row.vx_closed = visibility_x(p);
        }
        if (row.vz && row.vz_closed)
            rep.max_dev_z = std::max(rep.max_dev_z, std::abs(*row.vz - *row.vz_closed));
        if (row.vx && row.vx_closed)
            rep.max_dev_x = std::max(rep.max_dev_x, std::abs(*row.vx - *row.vx_closed));
        if (row.vx && row.vy)
            rep.max_dev_xy = std::max(rep.max_dev_xy, std::abs(*row.vx - *row.vy));
        if (!row.vz || !row.vx || !row.vy)
            ++rep.undefined;
        rep.rows.push_back(row);
    }
    return rep;
}

void write_oracle(std::ostream& os, RunConfig const& c, OracleReport const& r)
{
    os << header_line(c, "oracle") << "\n";
    os << "# max_abs_dev_vz=" << num(r.max_dev_z) << " max_abs_dev_vx=" << num(r.max_dev_x)
       << " max_abs_vx_minus_vy=" << num(r.max_dev_xy) << " undefined_points=" << r.undefined
       << "\n";
    os << "chi_s,chi_n,g2_s,vz_oracle,vz_closed,vx_oracle,vx_closed,vy_oracle,max_leakage\n";
    for (auto const& row : r.rows)
        os << num(row.chi_s) << ',' << num(row.chi_n) << ',' << num(row.g2_s) << ','
           << opt_num(row.vz) << ',' << opt_num(row.vz_closed) << ',' << opt_num(row.vx)
           << ',' << opt_num(row.vx_closed) << ',' << opt_num(row.vy) << ','
           << num(row.max_leakage, 3) << "\n";
}

//---------------------------------------------------------------------------//

OutcomeTable outcome_table(RunConfig const& c)
{
    if (c.outcomes == "ideal")
        return OutcomeTable::from_state(bell_phi(0).matrix());
    return OutcomeTable::from_model(c.noise, c.overlap_penalty);
}

Streams run_simulate(RunConfig const& c)
{
    return simulate_streams(c.experiment, outcome_table(c),
                            c.tomography.measurement_settings(), c.seed);
}

void write_streams(std::filesystem::path const& path, Streams const& s,
                   RunConfig const& c, TagFormat f)
{
    StreamHeader h{kVersion, c.seed, c.dump(), c.hash()};
    if (f == TagFormat::Text)
        write_text(path.string(), s, h);
    else
        write_records(path.string(), s, h);
}

Streams read_streams(std::filesystem::path const& path)
{
    if (!std::filesystem::exists(path))
        throw DataError("missing input " + path.string());
    if (path.extension() == ".txt")
        return read_text(path.string());
    return read_records(path.string());
}

//---------------------------------------------------------------------------//

CoincideResult run_coincide(RunConfig const& c, Streams const& s)
{
    CoincideResult r;
    auto const& e = c.experiment;
    r.windows = c.windows.calibrate
                    ? calibrate_offsets(s, e.rep_period_ps, e.clock_period_ps(),
                                        c.windows.calibration)
                    : c.windows.windows;
    r.threefold = extract_threefold(s, r.windows, e.rep_period_ps);
    return r;
}

void write_coincidences(std::ostream& os, RunConfig const& c, CoincideResult const& r)
{
    auto const& w = r.windows;
    os << header_line(c, "coincide") << "\n";
    os << "# windows dt1=" << w.dt1 << " dt2=" << w.dt2 << " dt3=" << w.dt3
       << " w_a=" << w.w_a << " w_r=" << w.w_r << " w_b=" << w.w_b << "\n";
    os << "setting,m,n,count\n";
    for (std::size_t k = 0; k < r.threefold.counts.size(); ++k)
    {
        auto const& sc = r.threefold.counts[k];
        os << k << ',' << to_char(sc.setting.m) << ',' << to_char(sc.setting.n) << ','
           << sc.count << "\n";
    }
}

TomographyData read_counts(std::filesystem::path const& path)
{
    std::ifstream f(path);
    if (!f)
        throw DataError("missing input " + path.string());
    TomographyData d;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line))
    {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.rfind("setting,", 0) == 0
            || line.rfind("m,", 0) == 0)
            continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        for (std::string col; std::getline(ss, col, ',');)
            cols.push_back(col);
        auto bad = [&](std::string const& why) {
            return DataError(path.string() + ":" + std::to_string(lineno) + ": " + why);
        };
        if (cols.size() != 3 && cols.size() != 4)
            throw bad("expected m,n,count or setting,m,n,count");
        std::size_t off = cols.size() - 3;
        if (cols[off].size() != 1 || cols[off + 1].size() != 1)
            throw bad("analyzer must be one of H,V,D,A,R,L");
        TomographyEntry e;
        try
        {
            e.setting = {pol_from_char(cols[off][0]), pol_from_char(cols[off + 1][0])};
            std::size_t used = 0;
            e.count = std::stod(cols[off + 2], &used);
            if (used != cols[off + 2].size())
                throw std::invalid_argument("trailing");
        }
        catch (std::exception const&)
        {
            throw bad("bad analyzer or count");
        }
        if (!(e.count >= 0))
            throw bad("negative count");
        d.entries.push_back(e);
    }
    if (d.entries.empty())
        throw DataError(path.string() + ": no counts");
    if (!d.informationally_complete())
        throw DataError(path.string() + ": settings are not informationally complete");
    return d;
}

//---------------------------------------------------------------------------//

TomographyReport run_tomography(RunConfig const& c, TomographyData const& data)
{
    TomographyReport r;
    r.total_counts = data.total();
    r.mle = reconstruct_mle(data, c.tomography.mle());
    r.fidelity = fidelity_to_phi_plus(r.mle.rho);
    r.phase = max_phase_fidelity(r.mle.rho);
    r.bootstrap = bootstrap_errors(data, c.tomography.bootstrap, c.seed, c.tomography.mle());
    return r;
}

void write_rho(std::ostream& os, RunConfig const& c, CMatrix const& rho)
{
    os << header_line(c, "tomography") << "\n";
    os << "# rho, qubit order (B', A'), basis HH,HV,VH,VV; row-major re,im pairs\n";
    for (Eigen::Index i = 0; i < rho.rows(); ++i)
    {
        for (Eigen::Index j = 0; j < rho.cols(); ++j)
            os << (j ? "," : "") << num(rho(i, j).real(), 17) << ','
               << num(rho(i, j).imag(), 17);
        os << "\n";
    }
}

void write_tomography_metrics(std::ostream& os, RunConfig const& c,
                              TomographyReport const& r)
{
    os << header_line(c, "tomography") << "\nmetric,value\n";
    os << "fidelity," << num(r.fidelity) << "\n";
    os << "fidelity_sd," << num(r.bootstrap.f_sd) << "\n";
    os << "f_theta," << num(r.phase.f_theta) << "\n";
    os << "f_theta_sd," << num(r.bootstrap.f_theta_sd) << "\n";
    os << "theta_star," << num(r.phase.theta_star) << "\n";
    os << "theta_degenerate," << (r.phase.degenerate ? 1 : 0) << "\n";
    os << "total_counts," << num(r.total_counts) << "\n";
    os << "mle_iterations," << r.mle.iterations << "\n";
    os << "mle_converged," << (r.mle.converged ? 1 : 0) << "\n";
    os << "mle_diluted_steps," << r.mle.diluted_steps << "\n";
    os << "bootstrap_resamples," << r.bootstrap.resamples << "\n";
}

//---------------------------------------------------------------------------//

ProtocolReport run_protocol_trials(RunConfig const& c)
{
    std::seed_seq seq{c.seed, std::uint64_t(0x70726f746f)};
    std::mt19937_64 rng(seq);
    ProtocolReport r;
    r.trials = c.protocol.trials;
    double T = c.protocol.transmittance;
    for (int i = 0; i < r.trials; ++i)
    {
        auto up = FibreChannel::random(rng, T, FibreLabel::Up);
        auto down = FibreChannel::random(rng, T, FibreLabel::Down);
        auto run = run_protocol(up, down);
        double expect = std::norm(up.forward()(0, 0)) * std::norm(down.forward()(1, 1)) / 2;
        r.max_probability_error
            = std::max(r.max_probability_error, std::abs(run.success_probability - expect));
        for (std::size_t b = 0; b < 2; ++b)
            if (run.branch_probability[b] > 0)
                r.max_fidelity_error
                    = std::max(r.max_fidelity_error, std::abs(run.fidelity[b] - 1));
        r.mean_success += run.success_probability / r.trials;
    }
    return r;
}

void write_protocol(std::ostream& os, RunConfig const& c, ProtocolReport const& r)
{
    os << header_line(c, "protocol") << "\nquantity,value\n";
    os << "trials," << r.trials << "\n";
    os << "transmittance," << num(c.protocol.transmittance) << "\n";
    os << "max_abs_fidelity_error," << num(r.max_fidelity_error, 3) << "\n";
    os << "max_abs_success_probability_error," << num(r.max_probability_error, 3) << "\n";
    os << "mean_success_probability," << num(r.mean_success) << "\n";
}

//---------------------------------------------------------------------------//

ScalingReport run_scaling(RunConfig const& c)
{
    ScalingOptions o;
    o.mu = c.scaling.mu;
    o.max_launch_mean = c.scaling.max_launch_mean;
    o.trials = c.scaling.trials;
    o.seed = c.seed;
    ScalingReport r;
    o.ancilla = AncillaKind::SinglePhoton;
    r.single = scaling_experiment(c.scaling.transmittances, o);
    o.ancilla = AncillaKind::CoherentCompensated;
    r.coherent = scaling_experiment(c.scaling.transmittances, o);
    r.slope_single = loglog_slope(r.single);
    r.slope_coherent = loglog_slope(r.coherent);
    return r;
}

void write_scaling(std::ostream& os, RunConfig const& c, ScalingReport const& r)
{
    os << header_line(c, "scaling") << "\n";
    os << "# slope_single_photon=" << num(r.slope_single)
       << " slope_coherent=" << num(r.slope_coherent) << "\n";
    os << "ancilla,transmittance,success_rate\n";
    for (auto const* rows : {&r.single, &r.coherent})
        for (auto const& row : *rows)
            os << to_string(row.ancilla) << ',' << num(row.transmittance) << ','
               << num(row.success_rate) << "\n";
}

//---------------------------------------------------------------------------//

PipelineReport run_pipeline(RunConfig const& c, std::filesystem::path const& out,
                            TagFormat f)
{
    std::filesystem::create_directories(out);
    auto tags = out / (f == TagFormat::Text ? "tags.txt" : "tags.bin");
    write_streams(tags, run_simulate(c), c, f);

    PipelineReport r;
    {
        Streams s = read_streams(tags);
        r.coincide = run_coincide(c, s);
    }
    {
        auto os = open_out(out / "coincidences.csv");
        write_coincidences(os, c, r.coincide);
    }
    r.tomography = run_tomography(c, read_counts(out / "coincidences.csv"));
    {
        auto os = open_out(out / "rho.txt");
        write_rho(os, c, r.tomography.mle.rho);
    }
    {
        auto os = open_out(out / "metrics.txt");
        write_tomography_metrics(os, c, r.tomography);
    }
    r.predicted_fidelity = c.outcomes == "ideal"
                               ? 1.0
                               : predicted_fidelity(c.noise) - c.overlap_penalty;
    double sd = r.tomography.bootstrap.f_sd;
    r.z_score = sd > 0 ? std::abs(r.tomography.fidelity - r.predicted_fidelity) / sd
                       : std::numeric_limits<double>::infinity();
    {
        auto os = open_out(out / "pipeline.txt");
        write_pipeline(os, c, r);
    }
    return r;
}

void write_pipeline(std::ostream& os, RunConfig const& c, PipelineReport const& r)
{
    auto const& w = r.coincide.windows;
    os << header_line(c, "pipeline") << "\nquantity,value\n";
    os << "dt1," << w.dt1 << "\ndt2," << w.dt2 << "\ndt3," << w.dt3 << "\n";
    os << "threefolds," << r.coincide.threefold.total() << "\n";
    os << "fidelity," << num(r.tomography.fidelity) << "\n";
    os << "fidelity_sd," << num(r.tomography.bootstrap.f_sd) << "\n";
    os << "f_theta," << num(r.tomography.phase.f_theta) << "\n";
    os << "f_theta_sd," << num(r.tomography.bootstrap.f_theta_sd) << "\n";
    os << "theta_star," << num(r.tomography.phase.theta_star) << "\n";
    os << "predicted_fidelity," << num(r.predicted_fidelity) << "\n";
    os << "z_score," << num(r.z_score) << "\n";
}

}  // namespace dfs
