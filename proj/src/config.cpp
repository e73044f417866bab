#include "dfs/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dfs
{
namespace
{
using nlohmann::json;

//! Strict reader: every key must be consumed.
class Section
{
  public:
    Section(json const& j, std::string path) : j_(j), path_(std::move(path))
    {
        if (!j_.is_object())
            throw ConfigError(where() + "expected an object");
    }

    template<class T>
    void get(char const* key, T& out)
    {
        if (!j_.contains(key))
            return;
        used_.insert(key);
        try
        {
            out = j_.at(key).get<T>();
        }
        catch (json::exception const&)
        {
            throw ConfigError(where() + "bad value for '" + key + "'");
        }
    }

    bool has(char const* key) const { return j_.contains(key); }

    Section sub(char const* key)
    {
        used_.insert(key);
        return Section(j_.at(key), path_ + key + ".");
    }

    void finish() const
    {
        for (auto const& [k, v] : j_.items())
            if (!used_.count(k))
                throw ConfigError("config: unknown key '" + path_ + k + "'");
    }

  private:
    std::string where() const
    {
        return "config" + (path_.empty() ? std::string() : " '" + path_.substr(0, path_.size() - 1) + "'") + ": ";
    }

    json const& j_;
    std::string path_;
    std::set<std::string> used_;
};

json detector_json(DetectorParams const& d)
{
    return {{"efficiency", d.efficiency},
            {"dark_rate_hz", d.dark_rate_hz},
            {"delay_ps", d.delay_ps},
            {"echo", d.echo}};
}

json to_json(RunConfig const& c)
{
    json j;
    j["seed"] = c.seed;
    j["noise"] = {{"chi_s", c.noise.chi_s},
                  {"chi_n", c.noise.chi_n},
                  {"g2_s", c.noise.g2_s},
                  {"overlap_penalty", c.overlap_penalty},
                  {"outcomes", c.outcomes}};
    if (c.counts)
        j["counts"] = {{"c_hh", c.counts->c_hh},   {"c_hv", c.counts->c_hv},
                       {"s_h_b", c.counts->s_h_b}, {"s_h_r", c.counts->s_h_r},
                       {"f", c.counts->f},         {"eta_d", c.counts->eta_d},
                       {"g2_s", c.counts->g2_s}};
    auto const& e = c.experiment;
    j["experiment"] = {
        {"rep_period_ps", e.rep_period_ps},
        {"clock_divider", e.clock_divider},
        {"gamma", e.gamma},
        {"gamma_window_ps", e.gamma_window_ps},
        {"mu", e.mu},
        {"jitter_sigma_ps", e.jitter_sigma_ps},
        {"echo_delay_ps", e.echo_delay_ps},
        {"echo_ratio", e.echo_ratio},
        {"threefold_prob", e.threefold_prob},
        {"dead_time_ps", e.dead_time_ps},
        {"coherence_times_ps", e.coherence_times_ps},
        {"duration_s", e.duration_s},
        {"detectors",
         {{"DA", detector_json(e.detectors[0])},
          {"DR", detector_json(e.detectors[1])},
          {"DB", detector_json(e.detectors[2])}}},
    };
    auto const& w = c.windows;
    j["windows"] = {{"calibrate", w.calibrate},
                    {"dt1", w.windows.dt1},
                    {"dt2", w.windows.dt2},
                    {"dt3", w.windows.dt3},
                    {"w_a", w.windows.w_a},
                    {"w_r", w.windows.w_r},
                    {"w_b", w.windows.w_b},
                    {"bin_ps", w.calibration.bin_ps},
                    {"snr_threshold", w.calibration.snr_threshold}};
    j["tomography"] = {{"settings", c.tomography.settings},
                       {"tol", c.tomography.tol},
                       {"max_iter", c.tomography.max_iter},
                       {"bootstrap", c.tomography.bootstrap}};
    auto const& o = c.oracle;
    j["oracle"] = {{"points", o.points},         {"s1", o.s1},
                   {"eta1", o.eta1},             {"eta2", o.eta2},
                   {"cutoff", o.cutoff},         {"chi_s_min", o.chi_s_min},
                   {"chi_s_max", o.chi_s_max},   {"chi_n_max", o.chi_n_max},
                   {"g2_max", o.g2_max},         {"include_degenerate", o.include_degenerate}};
    j["protocol"] = {{"trials", c.protocol.trials},
                     {"transmittance", c.protocol.transmittance}};
    j["scaling"] = {{"transmittances", c.scaling.transmittances},
                    {"mu", c.scaling.mu},
                    {"max_launch_mean", c.scaling.max_launch_mean},
                    {"trials", c.scaling.trials}};
    return j;
}

void read_detector(Section s, DetectorParams& d)
{
    s.get("efficiency", d.efficiency);
    s.get("dark_rate_hz", d.dark_rate_hz);
    s.get("delay_ps", d.delay_ps);
    s.get("echo", d.echo);
    s.finish();
}

RunConfig from_json(json const& j)
{
    RunConfig c;
    Section root(j, "");
    root.get("seed", c.seed);
    if (root.has("noise"))
    {
        auto s = root.sub("noise");
        s.get("chi_s", c.noise.chi_s);
        s.get("chi_n", c.noise.chi_n);
        s.get("g2_s", c.noise.g2_s);
        s.get("overlap_penalty", c.overlap_penalty);
        s.get("outcomes", c.outcomes);
        s.finish();
    }
    if (root.has("counts"))
    {
        auto s = root.sub("counts");
        CountSummary cs;
        cs.g2_s = c.noise.g2_s;
        s.get("c_hh", cs.c_hh);
        s.get("c_hv", cs.c_hv);
        s.get("s_h_b", cs.s_h_b);
        s.get("s_h_r", cs.s_h_r);
        s.get("f", cs.f);
        s.get("eta_d", cs.eta_d);
        s.get("g2_s", cs.g2_s);
        s.finish();
        c.counts = cs;
    }
    if (root.has("experiment"))
    {
        auto s = root.sub("experiment");
        auto& e = c.experiment;
        s.get("rep_period_ps", e.rep_period_ps);
        s.get("clock_divider", e.clock_divider);
        s.get("gamma", e.gamma);
        s.get("gamma_window_ps", e.gamma_window_ps);
        s.get("mu", e.mu);
        s.get("jitter_sigma_ps", e.jitter_sigma_ps);
        s.get("echo_delay_ps", e.echo_delay_ps);
        s.get("echo_ratio", e.echo_ratio);
        s.get("threefold_prob", e.threefold_prob);
        s.get("dead_time_ps", e.dead_time_ps);
        s.get("coherence_times_ps", e.coherence_times_ps);
        s.get("duration_s", e.duration_s);
        if (s.has("detectors"))
        {
            auto d = s.sub("detectors");
            char const* names[] = {"DA", "DR", "DB"};
            for (int i = 0; i < 3; ++i)
                if (d.has(names[i]))
                    read_detector(d.sub(names[i]), e.detectors[std::size_t(i)]);
            d.finish();
        }
        s.finish();
    }
    if (root.has("windows"))
    {
        auto s = root.sub("windows");
        auto& w = c.windows;
        s.get("calibrate", w.calibrate);
        s.get("dt1", w.windows.dt1);
        s.get("dt2", w.windows.dt2);
        s.get("dt3", w.windows.dt3);
        s.get("w_a", w.windows.w_a);
        s.get("w_r", w.windows.w_r);
        s.get("w_b", w.windows.w_b);
        s.get("bin_ps", w.calibration.bin_ps);
        s.get("snr_threshold", w.calibration.snr_threshold);
        s.finish();
    }
    if (root.has("tomography"))
    {
        auto s = root.sub("tomography");
        s.get("settings", c.tomography.settings);
        s.get("tol", c.tomography.tol);
        s.get("max_iter", c.tomography.max_iter);
        s.get("bootstrap", c.tomography.bootstrap);
        s.finish();
    }
    if (root.has("oracle"))
    {
        auto s = root.sub("oracle");
        auto& o = c.oracle;
        s.get("points", o.points);
        s.get("s1", o.s1);
        s.get("eta1", o.eta1);
        s.get("eta2", o.eta2);
        s.get("cutoff", o.cutoff);
        s.get("chi_s_min", o.chi_s_min);
        s.get("chi_s_max", o.chi_s_max);
        s.get("chi_n_max", o.chi_n_max);
        s.get("g2_max", o.g2_max);
        s.get("include_degenerate", o.include_degenerate);
        s.finish();
    }
    if (root.has("protocol"))
    {
        auto s = root.sub("protocol");
        s.get("trials", c.protocol.trials);
        s.get("transmittance", c.protocol.transmittance);
        s.finish();
    }
    if (root.has("scaling"))
    {
        auto s = root.sub("scaling");
        s.get("transmittances", c.scaling.transmittances);
        s.get("mu", c.scaling.mu);
        s.get("max_launch_mean", c.scaling.max_launch_mean);
        s.get("trials", c.scaling.trials);
        s.finish();
    }
    root.finish();
    // Window widths double as calibration widths.
    c.windows.calibration.w_a = c.windows.windows.w_a;
    c.windows.calibration.w_r = c.windows.windows.w_r;
    c.windows.calibration.w_b = c.windows.windows.w_b;
    return c;
}
}  // namespace

std::vector<MeasurementSetting> TomographyConfig::measurement_settings() const
{
    if (settings == "overcomplete")
        return overcomplete_settings();
    if (settings == "minimal")
        return minimal_settings();
    throw ConfigError("config: tomography.settings must be 'overcomplete' or 'minimal'");
}

MleOptions TomographyConfig::mle() const
{
    MleOptions o;
    o.tol = tol;
    o.max_iter = max_iter;
    return o;
}

std::string RunConfig::dump() const
{
    return to_json(*this).dump(2);
}

std::string RunConfig::hash() const
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : dump())
    {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void RunConfig::validate() const
{
    try
    {
        noise.validate();
        experiment.validate();
        if (counts)
            counts->validate();
    }
    catch (std::invalid_argument const& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(overlap_penalty >= 0))
        throw ConfigError("config: noise.overlap_penalty must be >= 0");
    if (outcomes != "model" && outcomes != "ideal")
        throw ConfigError("config: noise.outcomes must be 'model' or 'ideal'");
    tomography.measurement_settings();
    if (!(tomography.tol > 0) || tomography.max_iter < 1)
        throw ConfigError("config: tomography tol/max_iter must be positive");
    if (tomography.bootstrap < 100)
        throw ConfigError("config: tomography.bootstrap must be >= 100");
    if (oracle.points < 1 || oracle.cutoff < 3 || !(oracle.s1 > 0)
        || !(oracle.eta1 > 0) || !(oracle.eta2 > 0)
        || !(oracle.chi_s_min > 0 && oracle.chi_s_min <= oracle.chi_s_max)
        || !(oracle.chi_n_max >= 0) || !(oracle.g2_max >= 0))
        throw ConfigError("config: invalid oracle section");
    if (protocol.trials < 1 || !(protocol.transmittance > 0 && protocol.transmittance <= 1))
        throw ConfigError("config: invalid protocol section");
    if (scaling.transmittances.size() < 2 || scaling.trials < 1 || !(scaling.mu > 0)
        || !(scaling.max_launch_mean > 0))
        throw ConfigError("config: invalid scaling section");
    for (double t : scaling.transmittances)
        if (!(t > 0 && t <= 1))
            throw ConfigError("config: scaling transmittances must lie in (0, 1]");
    if (windows.calibration.bin_ps <= 0 || !(windows.calibration.snr_threshold > 0))
        throw ConfigError("config: invalid windows calibration");
    if (!windows.calibrate)
    {
        try
        {
            windows.windows.validate(experiment.rep_period_ps, experiment.clock_period_ps());
        }
        catch (std::invalid_argument const& e)
        {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }
}

RunConfig RunConfig::parse(std::string const& text)
{
    json j;
    try
    {
        j = json::parse(text, nullptr, true, true);
    }
    catch (json::parse_error const& e)
    {
        throw ConfigError(std::string("config: ") + e.what());
    }
    auto c = from_json(j);
    c.validate();
    return c;
}

RunConfig RunConfig::load(std::string const& path)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

}  // namespace dfs
