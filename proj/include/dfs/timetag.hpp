#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfs/multiphoton.hpp"
#include "dfs/tomography.hpp"

namespace dfs
{
//! Detector channels; the numeric value is also the tie-break order.
enum class Channel : std::uint8_t
{
    DA = 0,  //!< D_A′
    DR = 1,  //!< D_R″
    DB = 2,  //!< D_B′
    Clock = 3,
};

inline constexpr int kChannels = 4;
inline constexpr int kDetectors = 3;

char const* to_string(Channel c);
Channel channel_from_string(std::string const& s);

struct TimeTag
{
    std::int64_t t = 0;  //!< picoseconds
    Channel channel = Channel::Clock;

    bool operator==(TimeTag const&) const = default;
};

//! Strict ordering by time, then channel.
inline bool tag_less(TimeTag const& a, TimeTag const& b)
{
    return a.t < b.t || (a.t == b.t && a.channel < b.channel);
}

struct DetectorParams
{
    double efficiency = 0.01;
    double dark_rate_hz = 100;
    //! Arrival offset of the clocked pulse (or pair photon) after the clock.
    std::int64_t delay_ps = 0;
    bool echo = false;
};

struct ExperimentConfig
{
    std::int64_t rep_period_ps = 12500;
    int clock_divider = 100;
    //! Mean pair number per gamma_window_ps of pump time.
    double gamma = 9.0e-3;
    std::int64_t gamma_window_ps = 300;
    //! Mean coherent photon number per pulse ahead of detector efficiency.
    double mu = 0.31;
    double jitter_sigma_ps = 85;
    std::array<DetectorParams, kDetectors> detectors{
        DetectorParams{0.01, 100, 3000, true},
        DetectorParams{0.01, 100, 3500, true},
        DetectorParams{0.01, 100, 6000, false},
    };
    std::int64_t echo_delay_ps = 4500;
    double echo_ratio = 0.3;
    //! Probability per clock of a genuine heralded three-fold event.
    double threefold_prob = 0.01;
    //! Non-paralyzable dead time; 0 disables.
    std::int64_t dead_time_ps = 0;
    std::array<double, 2> coherence_times_ps{169, 176};
    //! Simulated time per analyzer setting.
    double duration_s = 0.1;

    void validate() const;
    std::int64_t clock_period_ps() const { return rep_period_ps * clock_divider; }
    std::int64_t duration_ps() const;
    DetectorParams const& detector(Channel c) const;
};

struct CoincidenceWindows
{
    std::int64_t dt1 = 3000;  //!< D_A′
    std::int64_t dt2 = 3500;  //!< D_R″
    std::int64_t dt3 = 6000;  //!< D_B′
    std::int64_t w_a = 300;
    std::int64_t w_r = 300;
    std::int64_t w_b = 100;

    //! Throws when a window leaves [0, clock_period) or offsets drift apart.
    void validate(std::int64_t rep_period_ps, std::int64_t clock_period_ps) const;
    std::int64_t offset(Channel c) const;
    std::int64_t width(Channel c) const;
    //! Half-open [lo, hi) relative to the clock.
    std::pair<std::int64_t, std::int64_t> bounds(Channel c) const;
};

/*!
 * Polarization outcome distribution for genuine three-folds.
 *
 * Probabilities are normalized within each analyzer basis pair, so the four
 * outcomes of (Z,Z), (X,Y), ... each sum to one.
 */
class OutcomeTable
{
  public:
    OutcomeTable() = default;

    /*!
     * From the multiphoton model. A positive overlap_penalty lowers the
     * fidelity to Φ⁺ by that amount by shrinking the X/Y correlators.
     */
    static OutcomeTable from_model(NoiseModelParams const& p,
                                   double overlap_penalty = 0);
    //! Born-rule table of a two-qubit state, (B′, A′) order.
    static OutcomeTable from_state(CMatrix const& rho);

    double probability(MeasurementSetting s) const;
    //! Draws (m, n) in the basis pair of `s`.
    MeasurementSetting sample(MeasurementSetting s, std::mt19937_64& rng) const;
    void validate() const;

    std::map<std::pair<Pol, Pol>, double> const& table() const { return p_; }

  private:
    std::map<std::pair<Pol, Pol>, double> p_;
};

//! One analyzer setting's slice of a run.
struct Segment
{
    MeasurementSetting setting;
    std::int64_t start_ps = 0;
    std::int64_t span_ps = 0;
    std::int64_t clocks = 0;
};

struct Streams
{
    std::array<std::vector<std::int64_t>, kChannels> tags;
    std::vector<Segment> segments;

    std::vector<std::int64_t> const& operator[](Channel c) const
    {
        return tags[std::size_t(c)];
    }
    std::vector<std::int64_t>& operator[](Channel c) { return tags[std::size_t(c)]; }

    std::size_t size() const;
    //! Single sorted stream, ties broken by channel.
    std::vector<TimeTag> merged() const;
    static Streams from_tags(std::vector<TimeTag> const& tags,
                             std::vector<Segment> segments);
    void sort();
    bool sorted() const;
};

/*!
 * Generate detector streams, one segment per setting.
 *
 * Segments are laid end to end on the clock grid and use independent RNG
 * substreams, so they are generated concurrently.
 */
Streams simulate_streams(ExperimentConfig const& cfg, OutcomeTable const& outcomes,
                         std::vector<MeasurementSetting> const& settings,
                         std::uint64_t seed);

struct Histogram
{
    std::int64_t origin_ps = 0;
    std::int64_t bin_ps = 1;
    std::vector<std::uint64_t> counts;

    std::uint64_t total() const;
    double bin_center(std::size_t i) const;
    std::int64_t bin_start(std::size_t i) const
    {
        return origin_ps + std::int64_t(i) * bin_ps;
    }
};

/*!
 * Delay of each stop tag after the latest start tag at or before it, folded
 * into [0, range_ps). Stops before the first start are not counted.
 */
Histogram start_stop_histogram(std::vector<std::int64_t> const& start,
                               std::vector<std::int64_t> const& stop,
                               std::int64_t bin_ps, std::int64_t range_ps);

enum class HistogramReference
{
    Clock,      //!< target delay after the clock, in [0, range)
    Condition,  //!< target delay after the first conditioning tag, in [-range/2, range/2)
};

struct Window
{
    std::int64_t offset = 0;
    std::int64_t width = 0;
};

/*!
 * Target-channel delays restricted to clock periods in which the conditioning
 * channel fired inside `cond`.
 */
Histogram conditional_histogram(Streams const& s, Channel cond, Window cond_window,
                                Channel target, std::int64_t bin_ps,
                                std::int64_t range_ps,
                                HistogramReference ref = HistogramReference::Clock);

struct ThreefoldEvent
{
    std::int64_t clock = 0;
    std::array<std::int64_t, kDetectors> t{};
    std::size_t segment = 0;
};

struct SettingCount
{
    MeasurementSetting setting;
    std::uint64_t count = 0;
    std::int64_t clocks = 0;
};

struct ThreefoldResult
{
    std::vector<SettingCount> counts;
    std::vector<ThreefoldEvent> events;
    std::uint64_t total() const;
};

//! Per-clock three-fold extraction with threshold detection.
ThreefoldResult extract_threefold(Streams const& s, CoincidenceWindows const& w,
                                  std::int64_t rep_period_ps);

struct NoPeakError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

//! Argmax-bin center; throws NoPeakError when (max − median)/√(median+1) < snr.
std::int64_t locate_peak(Histogram const& h, double snr_threshold);
std::int64_t locate_peak(std::vector<double> const& values, std::int64_t origin_ps,
                         std::int64_t bin_ps, double noise_floor, double snr_threshold);

//! Local maxima above `min_height`, at least `min_separation` bins apart.
std::vector<std::size_t> find_peaks(Histogram const& h, double min_height,
                                    std::size_t min_separation);

struct GaussianFit
{
    double mean = 0;
    double sigma = 0;
    double area = 0;
    double baseline = 0;
};

//! Moment fit around `center` after subtracting the side-band baseline.
GaussianFit fit_gaussian(Histogram const& h, double center, double half_width);

struct CalibrationOptions
{
    std::int64_t bin_ps = 10;
    double snr_threshold = 5;
    std::int64_t w_a = 300;
    std::int64_t w_r = 300;
    std::int64_t w_b = 100;
    //! Centroid half-width around the argmax bin.
    std::int64_t refine_half_width_ps = 250;
};

CoincidenceWindows calibrate_offsets(Streams const& s, std::int64_t rep_period_ps,
                                     std::int64_t clock_period_ps,
                                     CalibrationOptions const& opts = {});

/*!
 * Heralded g⁽²⁾ from per-clock window occupancy, with D_B′ heralding and
 * D_A′/D_R″ as the split arms. An unvalidated stand-in for a dedicated run.
 */
double heralded_g2(Streams const& s, CoincidenceWindows const& w);

//---------------------------------------------------------------------------//
// Files

struct StreamHeader
{
    std::string version;
    std::uint64_t seed = 0;
    std::string config;  //!< JSON echo
    std::string config_hash;
};

//! Binary records plus a JSON sidecar at `path + ".json"`.
void write_records(std::string const& path, Streams const& s, StreamHeader const& h);
Streams read_records(std::string const& path, StreamHeader* header = nullptr);

//! `channel,t` lines after `#` header lines.
void write_text(std::string const& path, Streams const& s, StreamHeader const& h);
Streams read_text(std::string const& path, StreamHeader* header = nullptr);

struct FormatError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

}  // namespace dfs
