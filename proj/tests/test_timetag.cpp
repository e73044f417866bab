#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <doctest.h>

#include "dfs/timetag.hpp"

using namespace dfs;
namespace fs = std::filesystem;

namespace
{
ExperimentConfig quiet()
{
    ExperimentConfig c;
    c.gamma = 0;
    c.mu = 0;
    c.threefold_prob = 0;
    for (auto& d : c.detectors)
        d.dark_rate_hz = 0;
    c.duration_s = 0.01;
    return c;
}

OutcomeTable ideal()
{
    return OutcomeTable::from_state(bell_phi(0).matrix());
}

fs::path scratch(std::string const& name)
{
    auto dir = fs::temp_directory_path() / "dfs_test_timetag";
    fs::create_directories(dir);
    return dir / name;
}
}  // namespace

TEST_CASE("with all rates zero only clocks remain")
{
    auto c = quiet();
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}, {Pol::D, Pol::D}}, 1);
    CHECK(s[Channel::DA].empty());
    CHECK(s[Channel::DR].empty());
    CHECK(s[Channel::DB].empty());
    std::int64_t per = std::int64_t(1e10) / c.clock_period_ps() + 1;
    CHECK(s[Channel::Clock].size() == std::size_t(2 * per));
    for (std::size_t i = 1; i < s[Channel::Clock].size(); ++i)
        CHECK(s[Channel::Clock][i] - s[Channel::Clock][i - 1] == c.clock_period_ps());
}

TEST_CASE("dark counts are Poisson in number")
{
    auto c = quiet();
    c.duration_s = 1;
    c.detectors[0].dark_rate_hz = 1e4;
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}}, 3);
    double expect = 1e4 * double(s.segments[0].span_ps) * 1e-12;
    CHECK(std::abs(double(s[Channel::DA].size()) - expect) < 4 * std::sqrt(expect));
    CHECK(s[Channel::DB].empty());
}

TEST_CASE("streams are sorted and reproducible")
{
    ExperimentConfig c;
    c.duration_s = 0.01;
    auto a = simulate_streams(c, ideal(), overcomplete_settings(), 5);
    auto b = simulate_streams(c, ideal(), overcomplete_settings(), 5);
    CHECK(a.sorted());
    CHECK(a.tags == b.tags);
    auto m = a.merged();
    CHECK(std::is_sorted(m.begin(), m.end(), tag_less));
    CHECK(m.size() == a.size());
}

TEST_CASE("start-stop histogram")
{
    auto h = start_stop_histogram({0}, {5000}, 10, 12500);
    CHECK(h.total() == 1);
    CHECK(h.counts[500] == 1);

    h = start_stop_histogram({100, 200}, {50, 250, 12700}, 10, 12500);
    // 50 precedes every start; 12700 − 200 folds to 0.
    CHECK(h.total() == 2);
    CHECK(h.counts[5] == 1);
    CHECK(h.counts[0] == 1);
    CHECK_THROWS_AS(start_stop_histogram({10, 0}, {5}, 10, 100), std::invalid_argument);
}

TEST_CASE("uncorrelated stops give a flat histogram")
{
    std::mt19937_64 rng(8);
    std::vector<std::int64_t> start, stop;
    for (std::int64_t i = 0; i < 20000; ++i)
        start.push_back(i * 12500);
    std::uniform_int_distribution<std::int64_t> u(0, 20000 * 12500 - 1);
    for (int i = 0; i < 100000; ++i)
        stop.push_back(u(rng));
    std::sort(stop.begin(), stop.end());
    auto h = start_stop_histogram(start, stop, 500, 12500);
    double mean = double(h.total()) / double(h.counts.size());
    for (auto n : h.counts)
        CHECK(std::abs(double(n) - mean) < 5 * std::sqrt(mean));
}

TEST_CASE("pulse peaks are one repetition period apart")
{
    ExperimentConfig c;
    c.duration_s = 0.1;
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}}, 2);
    std::int64_t bin = 50;
    auto h = start_stop_histogram(s[Channel::Clock], s[Channel::DA], bin, c.clock_period_ps());
    // The clocked pulse also carries the genuine three-folds; use a high
    // percentile of the pulse train as the reference height.
    std::vector<std::uint64_t> sorted_counts = h.counts;
    std::sort(sorted_counts.begin(), sorted_counts.end());
    double top = double(sorted_counts[sorted_counts.size() * 995 / 1000]);
    auto all = find_peaks(h, 0.7 * top, 40);
    // The first period holds the three-fold pulse and its echo.
    std::vector<std::size_t> peaks;
    for (auto i : all)
        if (h.bin_center(i) >= 12500)
            peaks.push_back(i);
    REQUIRE(peaks.size() >= 90);
    for (std::size_t i = 1; i < peaks.size(); ++i)
    {
        double a = fit_gaussian(h, h.bin_center(peaks[i - 1]), 250).mean;
        double b = fit_gaussian(h, h.bin_center(peaks[i]), 250).mean;
        CHECK(std::abs(b - a - 12500) <= double(bin));
    }
    CHECK(std::abs(h.bin_center(peaks.front()) - 15500) <= bin);
}

TEST_CASE("conditional histogram")
{
    auto c = quiet();
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}}, 1);
    auto h = conditional_histogram(s, Channel::DB, {6000, 300}, Channel::DA, 10, 12500);
    CHECK(h.total() == 0);
    CHECK(h.counts.size() == 1250);
    CHECK_THROWS_AS(conditional_histogram(s, Channel::DB, {6000, 0}, Channel::DA, 10, 12500),
                    std::invalid_argument);
}

TEST_CASE("two-detector delay peak has width sqrt(2) sigma")
{
    auto c = quiet();
    c.threefold_prob = 0.05;
    c.duration_s = 0.5;
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}}, 4);
    auto h = conditional_histogram(s, Channel::DB, {6000, 1000}, Channel::DA, 10, 12500,
                                   HistogramReference::Condition);
    REQUIRE(h.total() > 1000);
    auto g = fit_gaussian(h, -3000, 600);
    CHECK(g.mean == doctest::Approx(-3000).epsilon(0.005));
    CHECK(g.sigma == doctest::Approx(std::sqrt(2.0) * 85).epsilon(0.1));
}

TEST_CASE("coincidence windows are half-open")
{
    CoincidenceWindows w;
    auto [lo, hi] = w.bounds(Channel::DA);
    CHECK(lo == 2850);
    CHECK(hi == 3150);
    std::int64_t P = 1250000;
    auto make = [&](std::int64_t ta) {
        std::vector<TimeTag> t{{0, Channel::Clock}, {P, Channel::Clock}, {ta, Channel::DA},
                               {3500, Channel::DR}, {6000, Channel::DB}};
        std::sort(t.begin(), t.end(), tag_less);
        return extract_threefold(Streams::from_tags(t, {}), w, 12500).total();
    };
    CHECK(make(lo) == 1);
    CHECK(make(hi - 1) == 1);
    CHECK(make(hi) == 0);
    CHECK(make(lo - 1) == 0);
}

TEST_CASE("window validation")
{
    CoincidenceWindows w;
    CHECK_NOTHROW(w.validate(12500, 1250000));
    w.dt1 = 100;
    CHECK_THROWS(w.validate(12500, 1250000));
    w.dt1 = 3000 + 2 * 12500;
    CHECK_THROWS(w.validate(12500, 1250000));
}

TEST_CASE("peak location")
{
    std::vector<double> v(100, 1.0);
    v[20] = 50;
    v[70] = 100;
    CHECK(locate_peak(v, 0, 10, 1, 5) == 705);
    CHECK_THROWS_AS(locate_peak(std::vector<double>(100, 3.0), 0, 10, 1, 5), NoPeakError);
    Histogram flat{0, 10, std::vector<std::uint64_t>(100, 50)};
    CHECK_THROWS_AS(locate_peak(flat, 5), NoPeakError);
}

TEST_CASE("calibration finds the configured delays")
{
    ExperimentConfig c;
    c.duration_s = 0.02;
    auto s = simulate_streams(c, ideal(), overcomplete_settings(), 6);
    auto w = calibrate_offsets(s, c.rep_period_ps, c.clock_period_ps());
    CHECK(std::abs(w.dt1 - 3000) <= 10);
    CHECK(std::abs(w.dt2 - 3500) <= 10);
    CHECK(std::abs(w.dt3 - 6000) <= 10);
    CHECK_THROWS_AS(calibrate_offsets(simulate_streams(quiet(), ideal(), {{Pol::H, Pol::H}}, 1),
                                      c.rep_period_ps, c.clock_period_ps()),
                    NoPeakError);
}

TEST_CASE("visibilities survive the time-tag layer")
{
    ExperimentConfig c;
    c.duration_s = 0.3;
    NoiseModelParams p;
    std::vector<MeasurementSetting> set{{Pol::H, Pol::H}, {Pol::H, Pol::V}, {Pol::V, Pol::H},
                                        {Pol::V, Pol::V}, {Pol::D, Pol::D}, {Pol::D, Pol::A},
                                        {Pol::A, Pol::D}, {Pol::A, Pol::A}};
    auto s = simulate_streams(c, OutcomeTable::from_model(p), set, 10);
    auto r = extract_threefold(s, CoincidenceWindows{}, c.rep_period_ps);
    std::vector<double> n;
    for (auto const& k : r.counts)
        n.push_back(double(k.count));
    double vz = (n[0] + n[3] - n[1] - n[2]) / (n[0] + n[1] + n[2] + n[3]);
    double vx = (n[4] + n[7] - n[5] - n[6]) / (n[4] + n[5] + n[6] + n[7]);
    CHECK(vz == doctest::Approx(visibility_z(p)).epsilon(0.07));
    CHECK(vx == doctest::Approx(visibility_x(p)).epsilon(0.07));
}

TEST_CASE("outcome tables")
{
    auto t = ideal();
    CHECK(t.probability({Pol::H, Pol::H}) == doctest::Approx(0.5));
    CHECK(t.probability({Pol::R, Pol::R}) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK_NOTHROW(t.validate());

    NoiseModelParams p;
    auto fid = [](OutcomeTable const& tab) {
        TomographyData d;
        for (auto s : overcomplete_settings())
            d.entries.push_back({s, tab.probability(s)});
        return fidelity_to_phi_plus(reconstruct_linear(d));
    };
    CHECK(fid(OutcomeTable::from_model(p)) == doctest::Approx(predicted_fidelity(p)).epsilon(1e-9));
    CHECK(fid(OutcomeTable::from_model(p, 0.06))
          == doctest::Approx(predicted_fidelity(p) - 0.06).epsilon(1e-9));

    std::mt19937_64 rng(1);
    int hh = 0;
    for (int i = 0; i < 4000; ++i)
        hh += t.sample({Pol::H, Pol::V}, rng) == MeasurementSetting{Pol::H, Pol::H};
    CHECK(std::abs(hh - 2000) < 4 * std::sqrt(1000.0));
}

TEST_CASE("record and text files round trip")
{
    ExperimentConfig c;
    c.duration_s = 0.005;
    auto s = simulate_streams(c, ideal(), {{Pol::H, Pol::H}, {Pol::R, Pol::L}}, 12);
    StreamHeader h{"0.1.0", 12, "{}", "abc"};

    auto bin = scratch("tags.bin").string();
    write_records(bin, s, h);
    StreamHeader back;
    auto r = read_records(bin, &back);
    CHECK(r.tags == s.tags);
    CHECK(r.segments.size() == 2);
    CHECK(r.segments[1].setting == MeasurementSetting{Pol::R, Pol::L});
    CHECK(back.seed == 12);
    CHECK(back.config_hash == "abc");

    auto txt = scratch("tags.txt").string();
    write_text(txt, s, h);
    auto t = read_text(txt);
    CHECK(t.tags == s.tags);
    CHECK(t.segments.size() == 2);
}

TEST_CASE("malformed files are rejected")
{
    auto txt = scratch("bad.txt").string();
    std::ofstream(txt) << "# {}\nDA,notanumber\n";
    CHECK_THROWS_AS(read_text(txt), FormatError);
    std::ofstream(txt) << "XX,100\n";
    CHECK_THROWS_AS(read_text(txt), FormatError);

    auto bin = scratch("bad.bin").string();
    std::ofstream(bin, std::ios::binary) << "12345";
    CHECK_THROWS_AS(read_records(bin), FormatError);
    CHECK_THROWS(read_records(scratch("missing.bin").string()));
}

TEST_CASE("configuration checks")
{
    ExperimentConfig c;
    CHECK_NOTHROW(c.validate());
    c.detectors[0].delay_ps = 20000;
    CHECK_THROWS(c.validate());
    c = ExperimentConfig{};
    c.duration_s = 1e9;
    CHECK_THROWS_AS(c.duration_ps(), std::overflow_error);
}
