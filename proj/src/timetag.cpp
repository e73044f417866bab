#include "dfs/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include <json.hpp>

namespace dfs
{
namespace
{
constexpr char const* kChannelNames[kChannels] = {"DA", "DR", "DB", "CLOCK"};

int basis_of(Pol p)
{
    return (p == Pol::H || p == Pol::V) ? 0 : (p == Pol::D || p == Pol::A) ? 1 : 2;
}

std::array<Pol, 2> basis_pols(int b)
{
    static constexpr std::array<Pol, 2> table[3]
        = {{Pol::H, Pol::V}, {Pol::D, Pol::A}, {Pol::R, Pol::L}};
    return table[b];
}

double median(std::vector<double> v)
{
    if (v.empty())
        return 0;
    auto mid = v.begin() + std::ptrdiff_t(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

void require_sorted(std::vector<std::int64_t> const& v, char const* what)
{
    if (!std::is_sorted(v.begin(), v.end()))
        throw std::invalid_argument(std::string(what) + " stream is not sorted");
}

void apply_dead_time(std::vector<std::int64_t>& v, std::int64_t dead)
{
    if (dead <= 0 || v.empty())
        return;
    std::size_t out = 1;
    std::int64_t last = v[0];
    for (std::size_t i = 1; i < v.size(); ++i)
    {
        if (v[i] - last >= dead)
        {
            last = v[i];
            v[out++] = v[i];
        }
    }
    v.resize(out);
}

class SegmentGenerator
{
  public:
    SegmentGenerator(ExperimentConfig const& cfg, Segment const& seg,
                     std::uint64_t seed, std::size_t index)
        : cfg_(cfg), seg_(seg), seed_(seed), index_(index)
    {
    }

    Streams run(OutcomeTable const& outcomes)
    {
        clocks();
        pulses();
        pairs();
        threefolds(outcomes);
        darks();
        return std::move(out_);
    }

  private:
    std::mt19937_64 substream(std::uint64_t process) const
    {
        std::seed_seq seq{seed_, std::uint64_t(index_), process};
        return std::mt19937_64(seq);
    }

    void emit(Channel c, double t, std::mt19937_64& rng)
    {
        if (cfg_.jitter_sigma_ps > 0)
            t += jitter_(rng) * cfg_.jitter_sigma_ps;
        // Default rounding mode: ties to even.
        double r = std::nearbyint(t);
        if (r < 0)
            return;
        out_[c].push_back(std::int64_t(r));
    }

    std::int64_t end_ps() const { return seg_.start_ps + cfg_.duration_ps(); }

    void clocks()
    {
        auto& v = out_[Channel::Clock];
        v.reserve(std::size_t(seg_.clocks));
        for (std::int64_t j = 0; j < seg_.clocks; ++j)
            v.push_back(seg_.start_ps + j * cfg_.clock_period_ps());
    }

    //! Bernoulli(p) trials over indices [0, n) by geometric skipping.
    template<class F>
    static void bernoulli_indices(double p, std::int64_t n, std::mt19937_64& rng,
                                  F&& f)
    {
        if (!(p > 0))
            return;
        if (p >= 1)
        {
            for (std::int64_t i = 0; i < n; ++i)
                f(i);
            return;
        }
        std::geometric_distribution<std::int64_t> skip(p);
        for (std::int64_t i = skip(rng); i < n; i += skip(rng) + 1)
            f(i);
    }

    void pulses()
    {
        std::int64_t n = cfg_.duration_ps() / cfg_.rep_period_ps + 1;
        for (Channel c : {Channel::DA, Channel::DR})
        {
            auto const& d = cfg_.detector(c);
            double mean = cfg_.mu * d.efficiency;
            auto rng = substream(10 + std::uint64_t(c));
            double base = double(seg_.start_ps + d.delay_ps);
            bernoulli_indices(1 - std::exp(-mean), n, rng, [&](std::int64_t i) {
                emit(c, base + double(i * cfg_.rep_period_ps), rng);
            });
            if (d.echo && cfg_.echo_ratio > 0)
            {
                double echo_base = base + double(cfg_.echo_delay_ps);
                bernoulli_indices(1 - std::exp(-mean * cfg_.echo_ratio), n, rng,
                                  [&](std::int64_t i) {
                                      emit(c, echo_base + double(i * cfg_.rep_period_ps),
                                           rng);
                                  });
            }
        }
    }

    void pairs()
    {
        double rate = cfg_.gamma / double(cfg_.gamma_window_ps);
        auto const& da = cfg_.detector(Channel::DA);
        auto const& dr = cfg_.detector(Channel::DR);
        auto const& db = cfg_.detector(Channel::DB);
        double eta_a = 0.5 * (da.efficiency + dr.efficiency);
        double any = 1 - (1 - db.efficiency) * (1 - eta_a);
        double r = rate * any;
        if (!(r > 0))
            return;
        auto rng = substream(20);
        std::exponential_distribution<double> gap(r);
        // Fates with at least one click: (arm to D_R″?, A clicks, B clicks).
        struct Fate
        {
            bool to_r, a, b;
        };
        std::vector<Fate> fates;
        std::vector<double> weights;
        for (bool to_r : {false, true})
        {
            double ea = (to_r ? dr : da).efficiency;
            double eb = db.efficiency;
            for (bool a : {false, true})
                for (bool b : {false, true})
                {
                    if (!a && !b)
                        continue;
                    fates.push_back({to_r, a, b});
                    weights.push_back(0.5 * (a ? ea : 1 - ea) * (b ? eb : 1 - eb));
                }
        }
        std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
        double end = double(end_ps());
        for (double tau = double(seg_.start_ps) + gap(rng); tau < end; tau += gap(rng))
        {
            Fate f = fates[pick(rng)];
            auto const& arm = f.to_r ? dr : da;
            if (f.a)
                emit(f.to_r ? Channel::DR : Channel::DA, tau + double(arm.delay_ps), rng);
            if (f.b)
                emit(Channel::DB, tau + double(db.delay_ps), rng);
        }
    }

    void threefolds(OutcomeTable const& outcomes)
    {
        auto rng = substream(30);
        bernoulli_indices(cfg_.threefold_prob, seg_.clocks, rng, [&](std::int64_t j) {
            if (!(outcomes.sample(seg_.setting, rng) == seg_.setting))
                return;
            double clock = double(seg_.start_ps + j * cfg_.clock_period_ps());
            for (Channel c : {Channel::DA, Channel::DR, Channel::DB})
                emit(c, clock + double(cfg_.detector(c).delay_ps), rng);
        });
    }

    void darks()
    {
        for (Channel c : {Channel::DA, Channel::DR, Channel::DB})
        {
            double r = cfg_.detector(c).dark_rate_hz * 1e-12;
            if (!(r > 0))
                continue;
            auto rng = substream(40 + std::uint64_t(c));
            std::exponential_distribution<double> gap(r);
            double end = double(seg_.start_ps + seg_.span_ps);
            for (double t = double(seg_.start_ps) + gap(rng); t < end; t += gap(rng))
                out_[c].push_back(std::int64_t(std::floor(t)));
        }
    }

    ExperimentConfig const& cfg_;
    Segment const& seg_;
    std::uint64_t seed_;
    std::size_t index_;
    Streams out_;
    std::normal_distribution<double> jitter_{0.0, 1.0};
};

}  // namespace

char const* to_string(Channel c)
{
    return kChannelNames[std::size_t(c)];
}

Channel channel_from_string(std::string const& s)
{
    for (int i = 0; i < kChannels; ++i)
        if (s == kChannelNames[i])
            return Channel(i);
    throw FormatError("unknown channel '" + s + "'");
}

//---------------------------------------------------------------------------//

void ExperimentConfig::validate() const
{
    auto fail = [](std::string const& m) { throw std::invalid_argument("experiment: " + m); };
    if (rep_period_ps <= 0)
        fail("rep_period_ps must be positive");
    if (clock_divider < 1)
        fail("clock_divider must be >= 1");
    if (!(gamma >= 0) || gamma_window_ps <= 0)
        fail("gamma must be >= 0 with a positive window");
    if (!(mu >= 0))
        fail("mu must be >= 0");
    if (!(jitter_sigma_ps >= 0))
        fail("jitter must be >= 0");
    if (!(echo_ratio >= 0 && echo_ratio <= 1))
        fail("echo_ratio outside [0, 1]");
    if (echo_delay_ps < 0)
        fail("echo_delay_ps must be >= 0");
    if (!(threefold_prob >= 0 && threefold_prob <= 1))
        fail("threefold_prob outside [0, 1]");
    if (dead_time_ps < 0)
        fail("dead_time_ps must be >= 0");
    if (!(duration_s >= 0))
        fail("duration must be >= 0");
    for (auto const& d : detectors)
    {
        if (!(d.efficiency >= 0 && d.efficiency <= 1))
            fail("efficiency outside [0, 1]");
        if (!(d.dark_rate_hz >= 0))
            fail("dark rate must be >= 0");
        if (d.delay_ps < 0 || d.delay_ps >= rep_period_ps)
            fail("detector delay outside [0, rep_period)");
    }
    duration_ps();
}

std::int64_t ExperimentConfig::duration_ps() const
{
    // Leave headroom for segment concatenation and delays.
    constexpr double limit = 1e18;
    double d = duration_s * 1e12;
    if (!(d < limit))
        throw std::overflow_error("duration exceeds the 64-bit picosecond range");
    return std::int64_t(std::llround(d));
}

DetectorParams const& ExperimentConfig::detector(Channel c) const
{
    if (c == Channel::Clock)
        throw std::invalid_argument("clock has no detector parameters");
    return detectors[std::size_t(c)];
}

//---------------------------------------------------------------------------//

void CoincidenceWindows::validate(std::int64_t rep_period_ps,
                                  std::int64_t clock_period_ps) const
{
    for (Channel c : {Channel::DA, Channel::DR, Channel::DB})
    {
        if (width(c) <= 0)
            throw std::invalid_argument("coincidence window width must be positive");
        auto [lo, hi] = bounds(c);
        if (lo < 0 || hi > clock_period_ps)
            throw std::invalid_argument(
                std::string("window for ") + to_string(c)
                + " overlaps an adjacent clock period");
    }
    auto [mn, mx] = std::minmax({dt1, dt2, dt3});
    if (mx - mn > rep_period_ps)
        throw std::invalid_argument("window offsets differ by more than one rep period");
}

std::int64_t CoincidenceWindows::offset(Channel c) const
{
    switch (c)
    {
        case Channel::DA: return dt1;
        case Channel::DR: return dt2;
        case Channel::DB: return dt3;
        default: throw std::invalid_argument("clock has no window");
    }
}

std::int64_t CoincidenceWindows::width(Channel c) const
{
    switch (c)
    {
        case Channel::DA: return w_a;
        case Channel::DR: return w_r;
        case Channel::DB: return w_b;
        default: throw std::invalid_argument("clock has no window");
    }
}

std::pair<std::int64_t, std::int64_t> CoincidenceWindows::bounds(Channel c) const
{
    std::int64_t lo = offset(c) - width(c) / 2;
    return {lo, lo + width(c)};
}

//---------------------------------------------------------------------------//

OutcomeTable OutcomeTable::from_model(NoiseModelParams const& p, double overlap_penalty)
{
    p.validate();
    if (!(overlap_penalty >= 0))
        throw std::invalid_argument("overlap penalty must be >= 0");
    // Normalized per group, so the overall scale of the means drops out.
    auto t = coincidence_probabilities(p, 1e-3, 1, 1);
    OutcomeTable out;
    for (int bm = 0; bm < 3; ++bm)
        for (int bn = 0; bn < 3; ++bn)
        {
            double sum = 0;
            for (Pol m : basis_pols(bm))
                for (Pol n : basis_pols(bn))
                    sum += t.at({m, n});
            if (!(sum > 0))
                throw std::domain_error("outcome table: empty basis group");
            for (Pol m : basis_pols(bm))
                for (Pol n : basis_pols(bn))
                    out.p_[{m, n}] = t.at({m, n}) / sum;
        }

    if (overlap_penalty > 0)
    {
        auto correlator = [&](int bm, int bn) {
            auto [a, b] = basis_pols(bm);
            auto [c, d] = basis_pols(bn);
            return out.p_[{a, c}] - out.p_[{a, d}] - out.p_[{b, c}] + out.p_[{b, d}];
        };
        double spread = correlator(1, 1) - correlator(2, 2);
        double kappa = spread > 0 ? 1 - 4 * overlap_penalty / spread : -1;
        if (kappa < 0)
            throw std::domain_error("overlap penalty exceeds the X/Y correlations");
        for (int bm = 1; bm < 3; ++bm)
            for (int bn = 1; bn < 3; ++bn)
            {
                double shift = 0.25 * (kappa - 1) * correlator(bm, bn);
                auto [a, b] = basis_pols(bm);
                auto [c, d] = basis_pols(bn);
                out.p_[{a, c}] += shift;
                out.p_[{b, d}] += shift;
                out.p_[{a, d}] -= shift;
                out.p_[{b, c}] -= shift;
            }
    }
    out.validate();
    return out;
}

OutcomeTable OutcomeTable::from_state(CMatrix const& rho)
{
    OutcomeTable out;
    auto settings = overcomplete_settings();
    auto p = setting_probabilities(rho, settings);
    for (std::size_t i = 0; i < settings.size(); ++i)
        out.p_[{settings[i].m, settings[i].n}] = std::max(p[i], 0.0);
    for (int bm = 0; bm < 3; ++bm)
        for (int bn = 0; bn < 3; ++bn)
        {
            double sum = 0;
            for (Pol m : basis_pols(bm))
                for (Pol n : basis_pols(bn))
                    sum += out.p_[{m, n}];
            for (Pol m : basis_pols(bm))
                for (Pol n : basis_pols(bn))
                    out.p_[{m, n}] /= sum;
        }
    out.validate();
    return out;
}

double OutcomeTable::probability(MeasurementSetting s) const
{
    auto it = p_.find({s.m, s.n});
    if (it == p_.end())
        throw std::out_of_range("outcome table: missing setting");
    return it->second;
}

MeasurementSetting OutcomeTable::sample(MeasurementSetting s, std::mt19937_64& rng) const
{
    auto ms = basis_pols(basis_of(s.m));
    auto ns = basis_pols(basis_of(s.n));
    double u = std::uniform_real_distribution<double>(0, 1)(rng);
    MeasurementSetting last{ms[1], ns[1]};
    for (Pol m : ms)
        for (Pol n : ns)
        {
            u -= probability({m, n});
            if (u < 0)
                return {m, n};
        }
    return last;
}

void OutcomeTable::validate() const
{
    for (int bm = 0; bm < 3; ++bm)
        for (int bn = 0; bn < 3; ++bn)
        {
            double sum = 0;
            for (Pol m : basis_pols(bm))
                for (Pol n : basis_pols(bn))
                {
                    double v = probability({m, n});
                    if (v < -1e-15)
                        throw std::domain_error("outcome table: negative probability");
                    sum += v;
                }
            if (std::abs(sum - 1) > 1e-12)
                throw std::domain_error("outcome table: group does not sum to 1");
        }
}

//---------------------------------------------------------------------------//

std::size_t Streams::size() const
{
    std::size_t n = 0;
    for (auto const& v : tags)
        n += v.size();
    return n;
}

std::vector<TimeTag> Streams::merged() const
{
    std::vector<TimeTag> out;
    out.reserve(size());
    std::array<std::size_t, kChannels> pos{};
    for (;;)
    {
        int best = -1;
        for (int c = 0; c < kChannels; ++c)
        {
            if (pos[c] >= tags[c].size())
                continue;
            if (best < 0 || tags[c][pos[c]] < tags[best][pos[best]])
                best = c;
        }
        if (best < 0)
            break;
        out.push_back({tags[best][pos[best]++], Channel(best)});
    }
    return out;
}

Streams Streams::from_tags(std::vector<TimeTag> const& tags, std::vector<Segment> segments)
{
    Streams s;
    for (auto const& t : tags)
    {
        if (std::uint8_t(t.channel) >= kChannels)
            throw FormatError("invalid channel");
        s[t.channel].push_back(t.t);
    }
    s.segments = std::move(segments);
    return s;
}

void Streams::sort()
{
    for (auto& v : tags)
        std::sort(v.begin(), v.end());
}

bool Streams::sorted() const
{
    return std::all_of(tags.begin(), tags.end(),
                       [](auto const& v) { return std::is_sorted(v.begin(), v.end()); });
}

Streams simulate_streams(ExperimentConfig const& cfg, OutcomeTable const& outcomes,
                         std::vector<MeasurementSetting> const& settings,
                         std::uint64_t seed)
{
    cfg.validate();
    if (settings.empty())
        throw std::invalid_argument("simulate_streams: no settings");
    outcomes.validate();

    std::int64_t const clocks = cfg.duration_ps() / cfg.clock_period_ps() + 1;
    std::int64_t const span = clocks * cfg.clock_period_ps();
    if (double(span) * double(settings.size()) + 4.0 * double(cfg.rep_period_ps)
        > 0.5 * double(std::numeric_limits<std::int64_t>::max()))
        throw std::overflow_error("run exceeds the 64-bit picosecond range");

    Streams all;
    for (std::size_t k = 0; k < settings.size(); ++k)
        all.segments.push_back({settings[k], std::int64_t(k) * span, span, clocks});

    std::vector<Streams> parts(settings.size());
    unsigned threads = std::max(1u, std::min(std::thread::hardware_concurrency(), 16u));
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t k = t; k < settings.size(); k += threads)
                parts[k] = SegmentGenerator(cfg, all.segments[k], seed, k).run(outcomes);
        });
    for (auto& th : pool)
        th.join();

    for (int c = 0; c < kChannels; ++c)
    {
        std::size_t n = 0;
        for (auto const& p : parts)
            n += p.tags[c].size();
        all.tags[c].reserve(n);
        for (auto& p : parts)
        {
            all.tags[c].insert(all.tags[c].end(), p.tags[c].begin(), p.tags[c].end());
            std::vector<std::int64_t>().swap(p.tags[c]);
        }
    }
    all.sort();
    for (Channel c : {Channel::DA, Channel::DR, Channel::DB})
        apply_dead_time(all[c], cfg.dead_time_ps);
    return all;
}

//---------------------------------------------------------------------------//

std::uint64_t Histogram::total() const
{
    std::uint64_t n = 0;
    for (auto c : counts)
        n += c;
    return n;
}

double Histogram::bin_center(std::size_t i) const
{
    return double(bin_start(i)) + 0.5 * double(bin_ps);
}

namespace
{
Histogram make_histogram(std::int64_t origin, std::int64_t bin_ps, std::int64_t range_ps)
{
    if (bin_ps <= 0 || range_ps <= 0)
        throw std::invalid_argument("histogram: bin and range must be positive");
    Histogram h;
    h.origin_ps = origin;
    h.bin_ps = bin_ps;
    h.counts.assign(std::size_t((range_ps + bin_ps - 1) / bin_ps), 0);
    return h;
}

//! First tag of `v` in [lo, hi) at or after `pos`, advancing `pos` to lo.
std::int64_t const* first_in(std::vector<std::int64_t> const& v, std::size_t& pos,
                             std::int64_t lo, std::int64_t hi)
{
    while (pos < v.size() && v[pos] < lo)
        ++pos;
    return (pos < v.size() && v[pos] < hi) ? &v[pos] : nullptr;
}
}  // namespace

Histogram start_stop_histogram(std::vector<std::int64_t> const& start,
                               std::vector<std::int64_t> const& stop,
                               std::int64_t bin_ps, std::int64_t range_ps)
{
    require_sorted(start, "start");
    require_sorted(stop, "stop");
    Histogram h = make_histogram(0, bin_ps, range_ps);
    std::size_t s = 0;
    for (std::int64_t t : stop)
    {
        while (s + 1 < start.size() && start[s + 1] <= t)
            ++s;
        if (start.empty() || start[s] > t)
            continue;
        std::int64_t d = (t - start[s]) % range_ps;
        ++h.counts[std::size_t(d / bin_ps)];
    }
    return h;
}

Histogram conditional_histogram(Streams const& s, Channel cond, Window cond_window,
                                Channel target, std::int64_t bin_ps,
                                std::int64_t range_ps, HistogramReference ref)
{
    if (cond_window.width <= 0)
        throw std::invalid_argument("conditional_histogram: window width must be positive");
    auto const& clocks = s[Channel::Clock];
    auto const& cv = s[cond];
    auto const& tv = s[target];
    require_sorted(clocks, "clock");
    require_sorted(cv, "condition");
    require_sorted(tv, "target");

    std::int64_t const half = range_ps / 2;
    Histogram h = make_histogram(ref == HistogramReference::Clock ? 0 : -half, bin_ps,
                                 range_ps);
    std::int64_t const lo_off = cond_window.offset - cond_window.width / 2;
    std::size_t cpos = 0;
    for (std::int64_t c : clocks)
    {
        auto hit = first_in(cv, cpos, c + lo_off, c + lo_off + cond_window.width);
        if (!hit)
            continue;
        std::int64_t ref_t = ref == HistogramReference::Clock ? c : *hit - half;
        auto it = std::lower_bound(tv.begin(), tv.end(), ref_t);
        for (; it != tv.end() && *it < ref_t + range_ps; ++it)
            ++h.counts[std::size_t((*it - ref_t) / bin_ps)];
    }
    return h;
}

//---------------------------------------------------------------------------//

std::uint64_t ThreefoldResult::total() const
{
    std::uint64_t n = 0;
    for (auto const& c : counts)
        n += c.count;
    return n;
}

ThreefoldResult extract_threefold(Streams const& s, CoincidenceWindows const& w,
                                  std::int64_t rep_period_ps)
{
    auto const& clocks = s[Channel::Clock];
    for (auto const& v : s.tags)
        require_sorted(v, "input");

    std::vector<Segment> segs = s.segments;
    if (segs.empty())
    {
        std::int64_t end = clocks.empty() ? 0 : clocks.back() + 1;
        segs.push_back({MeasurementSetting{}, 0, end, std::int64_t(clocks.size())});
    }
    std::int64_t period = !s.segments.empty() && segs.front().clocks > 1
                              ? segs.front().span_ps / segs.front().clocks
                              : (clocks.size() > 1 ? clocks[1] - clocks[0]
                                                   : std::numeric_limits<std::int64_t>::max());
    w.validate(rep_period_ps, period);

    ThreefoldResult r;
    for (auto const& seg : segs)
        r.counts.push_back({seg.setting, 0, 0});

    std::array<std::size_t, kDetectors> pos{};
    std::size_t si = 0;
    for (std::int64_t c : clocks)
    {
        while (si < segs.size() && c >= segs[si].start_ps + segs[si].span_ps)
            ++si;
        if (si >= segs.size())
            break;
        if (c < segs[si].start_ps)
            continue;
        ++r.counts[si].clocks;
        ThreefoldEvent ev{c, {}, si};
        bool all = true;
        for (int d = 0; d < kDetectors; ++d)
        {
            auto [lo, hi] = w.bounds(Channel(d));
            auto hit = first_in(s.tags[std::size_t(d)], pos[std::size_t(d)], c + lo, c + hi);
            if (!hit)
            {
                all = false;
                continue;
            }
            ev.t[std::size_t(d)] = *hit;
        }
        if (all)
        {
            ++r.counts[si].count;
            r.events.push_back(ev);
        }
    }
    return r;
}

//---------------------------------------------------------------------------//

std::int64_t locate_peak(std::vector<double> const& values, std::int64_t origin_ps,
                         std::int64_t bin_ps, double noise_floor, double snr_threshold)
{
    if (values.empty())
        throw NoPeakError("no peak: empty histogram");
    auto it = std::max_element(values.begin(), values.end());
    double excess = *it - median(values);
    if (!(excess > 0) || excess < snr_threshold * noise_floor)
        throw NoPeakError("no peak above the noise floor");
    std::size_t i = std::size_t(it - values.begin());
    return origin_ps + std::int64_t(i) * bin_ps + bin_ps / 2;
}

std::int64_t locate_peak(Histogram const& h, double snr_threshold)
{
    std::vector<double> v(h.counts.begin(), h.counts.end());
    return locate_peak(v, h.origin_ps, h.bin_ps, std::sqrt(median(v) + 1), snr_threshold);
}

std::vector<std::size_t> find_peaks(Histogram const& h, double min_height,
                                    std::size_t min_separation)
{
    std::vector<std::size_t> cand;
    auto const& c = h.counts;
    for (std::size_t i = 0; i < c.size(); ++i)
    {
        if (double(c[i]) < min_height)
            continue;
        bool left = i == 0 || c[i] >= c[i - 1];
        bool right = i + 1 == c.size() || c[i] > c[i + 1];
        if (left && right)
            cand.push_back(i);
    }
    // Highest first, then suppress neighbours.
    std::stable_sort(cand.begin(), cand.end(),
                     [&](std::size_t a, std::size_t b) { return c[a] > c[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t i : cand)
    {
        bool close = std::any_of(kept.begin(), kept.end(), [&](std::size_t k) {
            return (i > k ? i - k : k - i) < min_separation;
        });
        if (!close)
            kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

GaussianFit fit_gaussian(Histogram const& h, double center, double half_width)
{
    double side_sum = 0;
    std::size_t side_n = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
    {
        double d = std::abs(h.bin_center(i) - center);
        if (d > half_width && d <= 2 * half_width)
        {
            side_sum += double(h.counts[i]);
            ++side_n;
        }
    }
    GaussianFit f;
    f.baseline = side_n ? side_sum / double(side_n) : 0;
    double w0 = 0, w1 = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
    {
        double x = h.bin_center(i);
        if (std::abs(x - center) > half_width)
            continue;
        double w = std::max(double(h.counts[i]) - f.baseline, 0.0);
        w0 += w;
        w1 += w * x;
    }
    if (!(w0 > 0))
        throw NoPeakError("gaussian fit: no signal above baseline");
    f.area = w0;
    f.mean = w1 / w0;
    double w2 = 0;
    for (std::size_t i = 0; i < h.counts.size(); ++i)
    {
        double x = h.bin_center(i);
        if (std::abs(x - center) > half_width)
            continue;
        double w = std::max(double(h.counts[i]) - f.baseline, 0.0);
        w2 += w * (x - f.mean) * (x - f.mean);
    }
    double bin = double(h.bin_ps);
    f.sigma = std::sqrt(std::max(w2 / w0 - bin * bin / 12, 0.0));
    return f;
}

namespace
{
//! Baseline-subtracted centroid of `v` within ±half of `peak`.
std::int64_t refine_peak(std::vector<double> const& v, std::int64_t origin,
                         std::int64_t bin, std::int64_t peak, std::int64_t half)
{
    auto n = std::int64_t(v.size());
    auto at = [&](std::int64_t t) { return (t - origin) / bin; };
    std::int64_t lo = std::max<std::int64_t>(0, at(peak - half));
    std::int64_t hi = std::min(n - 1, at(peak + half));
    std::vector<double> side;
    for (std::int64_t i = std::max<std::int64_t>(0, at(peak - 2 * half)); i < lo; ++i)
        side.push_back(v[std::size_t(i)]);
    for (std::int64_t i = hi + 1; i <= std::min(n - 1, at(peak + 2 * half)); ++i)
        side.push_back(v[std::size_t(i)]);
    double base = side.empty() ? 0 : median(side);
    double w = 0, m = 0;
    for (std::int64_t i = lo; i <= hi; ++i)
    {
        double x = std::max(0.0, v[std::size_t(i)] - base);
        w += x;
        m += x * (double(origin) + (double(i) + 0.5) * double(bin));
    }
    return w > 0 ? std::llround(m / w) : peak;
}

std::int64_t refined(Histogram const& h, double snr, std::int64_t half)
{
    std::vector<double> v(h.counts.begin(), h.counts.end());
    return refine_peak(v, h.origin_ps, h.bin_ps, locate_peak(h, snr), half);
}
}  // namespace

CoincidenceWindows calibrate_offsets(Streams const& s, std::int64_t rep_period_ps,
                                     std::int64_t clock_period_ps,
                                     CalibrationOptions const& o)
{
    CoincidenceWindows w;
    w.w_a = o.w_a;
    w.w_r = o.w_r;
    w.w_b = o.w_b;
    auto const& clocks = s[Channel::Clock];
    if (clocks.empty())
        throw NoPeakError("no peak: no clock tags");

    // Folding onto one rep period stacks every pulse; the echo is the lower peak.
    std::int64_t const half = o.refine_half_width_ps;
    w.dt1 = refined(start_stop_histogram(clocks, s[Channel::DA], o.bin_ps, rep_period_ps),
                    o.snr_threshold, half);
    w.dt2 = refined(start_stop_histogram(clocks, s[Channel::DR], o.bin_ps, rep_period_ps),
                    o.snr_threshold, half);

    Histogram cond = conditional_histogram(s, Channel::DA, {w.dt1, w.w_a}, Channel::DB,
                                           o.bin_ps, clock_period_ps);
    Histogram uncond = start_stop_histogram(clocks, s[Channel::DB], o.bin_ps,
                                            clock_period_ps);
    std::size_t n_cond = 0, pos = 0;
    for (std::int64_t c : clocks)
        if (first_in(s[Channel::DA], pos, c + w.dt1 - w.w_a / 2, c + w.dt1 - w.w_a / 2 + w.w_a))
            ++n_cond;
    double scale = double(n_cond) / double(clocks.size());
    std::vector<double> diff(cond.counts.size());
    std::vector<double> cv(cond.counts.begin(), cond.counts.end());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = double(cond.counts[i]) - scale * double(uncond.counts[i]);
    w.dt3 = refine_peak(diff, 0, o.bin_ps,
                        locate_peak(diff, 0, o.bin_ps, std::sqrt(median(cv) + 1),
                                    o.snr_threshold),
                        half);
    w.validate(rep_period_ps, clock_period_ps);
    return w;
}

double heralded_g2(Streams const& s, CoincidenceWindows const& w)
{
    auto const& clocks = s[Channel::Clock];
    std::array<std::size_t, kDetectors> pos{};
    double nb = 0, nba = 0, nbr = 0, nbar = 0;
    for (std::int64_t c : clocks)
    {
        std::array<bool, kDetectors> hit{};
        for (int d = 0; d < kDetectors; ++d)
        {
            auto [lo, hi] = w.bounds(Channel(d));
            hit[std::size_t(d)]
                = first_in(s.tags[std::size_t(d)], pos[std::size_t(d)], c + lo, c + hi)
                  != nullptr;
        }
        if (!hit[2])
            continue;
        nb += 1;
        nba += hit[0];
        nbr += hit[1];
        nbar += hit[0] && hit[1];
    }
    if (nba == 0 || nbr == 0)
        throw std::domain_error("heralded_g2: no heralded two-folds");
    return nbar * nb / (nba * nbr);
}

//---------------------------------------------------------------------------//

namespace
{
nlohmann::json header_json(Streams const& s, StreamHeader const& h, std::size_t records)
{
    nlohmann::json j;
    j["format"] = "dfs-timetag";
    j["version"] = h.version;
    j["seed"] = h.seed;
    j["config_hash"] = h.config_hash;
    j["channels"] = {kChannelNames[0], kChannelNames[1], kChannelNames[2], kChannelNames[3]};
    j["record_bytes"] = 9;
    j["records"] = records;
    std::int64_t duration = 0;
    nlohmann::json segs = nlohmann::json::array();
    for (auto const& seg : s.segments)
    {
        segs.push_back({{"m", std::string(1, to_char(seg.setting.m))},
                        {"n", std::string(1, to_char(seg.setting.n))},
                        {"start_ps", seg.start_ps},
                        {"span_ps", seg.span_ps},
                        {"clocks", seg.clocks}});
        duration = std::max(duration, seg.start_ps + seg.span_ps);
    }
    j["duration_ps"] = duration;
    j["segments"] = segs;
    j["config"] = h.config.empty() ? nlohmann::json::object() : nlohmann::json::parse(h.config);
    return j;
}

std::vector<Segment> segments_from_json(nlohmann::json const& j)
{
    std::vector<Segment> out;
    for (auto const& s : j.at("segments"))
    {
        Segment seg;
        seg.setting.m = pol_from_char(s.at("m").get<std::string>().at(0));
        seg.setting.n = pol_from_char(s.at("n").get<std::string>().at(0));
        seg.start_ps = s.at("start_ps").get<std::int64_t>();
        seg.span_ps = s.at("span_ps").get<std::int64_t>();
        seg.clocks = s.at("clocks").get<std::int64_t>();
        out.push_back(seg);
    }
    return out;
}

void fill_header(nlohmann::json const& j, StreamHeader* h)
{
    if (!h)
        return;
    h->version = j.value("version", "");
    h->seed = j.value("seed", std::uint64_t(0));
    h->config_hash = j.value("config_hash", "");
    h->config = j.contains("config") ? j["config"].dump() : "{}";
}

void check_stream(Streams const& s)
{
    for (auto const& v : s.tags)
    {
        if (!std::is_sorted(v.begin(), v.end()))
            throw FormatError("time tags are not sorted");
        if (!v.empty() && v.front() < 0)
            throw FormatError("negative time tag");
    }
}
}  // namespace

void write_records(std::string const& path, Streams const& s, StreamHeader const& h)
{
    auto tags = s.merged();
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open " + path);
    std::vector<char> buf;
    buf.reserve(9 * 65536);
    auto flush = [&] {
        f.write(buf.data(), std::streamsize(buf.size()));
        buf.clear();
    };
    for (auto const& t : tags)
    {
        buf.push_back(char(t.channel));
        auto u = std::uint64_t(t.t);
        for (int b = 0; b < 8; ++b)
            buf.push_back(char((u >> (8 * b)) & 0xff));
        if (buf.size() >= 9 * 65536)
            flush();
    }
    flush();
    if (!f)
        throw std::runtime_error("write failed: " + path);

    std::ofstream side(path + ".json");
    side << header_json(s, h, tags.size()).dump(2) << "\n";
    if (!side)
        throw std::runtime_error("write failed: " + path + ".json");
}

Streams read_records(std::string const& path, StreamHeader* header)
{
    std::ifstream side(path + ".json");
    if (!side)
        throw FormatError("missing sidecar " + path + ".json");
    nlohmann::json j;
    try
    {
        j = nlohmann::json::parse(side);
    }
    catch (nlohmann::json::exception const& e)
    {
        throw FormatError(std::string("sidecar: ") + e.what());
    }
    if (j.value("format", "") != "dfs-timetag")
        throw FormatError("sidecar: not a time-tag header");
    fill_header(j, header);

    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path);
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (data.size() % 9 != 0)
        throw FormatError("record file size is not a multiple of 9 bytes");
    std::size_t n = data.size() / 9;
    if (j.contains("records") && j["records"].get<std::size_t>() != n)
        throw FormatError("record count does not match the sidecar");

    Streams s;
    std::vector<Segment> segs;
    try
    {
        segs = segments_from_json(j);
    }
    catch (std::exception const& e)
    {
        throw FormatError(std::string("sidecar segments: ") + e.what());
    }
    TimeTag prev{std::numeric_limits<std::int64_t>::min(), Channel::DA};
    for (std::size_t i = 0; i < n; ++i)
    {
        unsigned char const* r = &data[9 * i];
        if (r[0] >= kChannels)
            throw FormatError("invalid channel byte");
        std::uint64_t u = 0;
        for (int b = 0; b < 8; ++b)
            u |= std::uint64_t(r[1 + b]) << (8 * b);
        if (u > std::uint64_t(std::numeric_limits<std::int64_t>::max()))
            throw FormatError("time tag out of range");
        TimeTag t{std::int64_t(u), Channel(r[0])};
        if (i > 0 && !tag_less(prev, t) && !(prev == t))
            throw FormatError("records are not sorted");
        prev = t;
        s[t.channel].push_back(t.t);
    }
    s.segments = std::move(segs);
    check_stream(s);
    return s;
}

void write_text(std::string const& path, Streams const& s, StreamHeader const& h)
{
    std::ofstream f(path);
    if (!f)
        throw std::runtime_error("cannot open " + path);
    auto tags = s.merged();
    f << "# " << header_json(s, h, tags.size()).dump() << "\n";
    f << "channel,t\n";
    for (auto const& t : tags)
        f << to_string(t.channel) << ',' << t.t << '\n';
    if (!f)
        throw std::runtime_error("write failed: " + path);
}

Streams read_text(std::string const& path, StreamHeader* header)
{
    std::ifstream f(path);
    if (!f)
        throw FormatError("cannot open " + path);
    std::string line;
    std::vector<TimeTag> tags;
    std::vector<Segment> segs;
    std::size_t lineno = 0;
    while (std::getline(f, line))
    {
        ++lineno;
        if (line.empty())
            continue;
        if (line[0] == '#')
        {
            try
            {
                auto j = nlohmann::json::parse(line.substr(1));
                segs = segments_from_json(j);
                fill_header(j, header);
            }
            catch (std::exception const& e)
            {
                throw FormatError("line " + std::to_string(lineno) + ": bad header: " + e.what());
            }
            continue;
        }
        if (line == "channel,t")
            continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw FormatError("line " + std::to_string(lineno) + ": expected channel,t");
        TimeTag t;
        t.channel = channel_from_string(line.substr(0, comma));
        std::size_t used = 0;
        try
        {
            t.t = std::stoll(line.substr(comma + 1), &used);
        }
        catch (std::exception const&)
        {
            throw FormatError("line " + std::to_string(lineno) + ": bad time value");
        }
        if (used != line.size() - comma - 1)
            throw FormatError("line " + std::to_string(lineno) + ": trailing characters");
        tags.push_back(t);
    }
    auto s = Streams::from_tags(tags, std::move(segs));
    check_stream(s);
    return s;
}

}  // namespace dfs
