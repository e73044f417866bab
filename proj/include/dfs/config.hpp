#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfs/multiphoton.hpp"
#include "dfs/timetag.hpp"
#include "dfs/tomography.hpp"

namespace dfs
{
struct ConfigError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

struct OracleConfig
{
    int points = 50;
    double s1 = 0.01;
    double eta1 = 1;
    double eta2 = 1;
    int cutoff = 10;
    double chi_s_min = 0.01;
    double chi_s_max = 1;
    double chi_n_max = 0.5;
    double g2_max = 1;
    //! Adds a χ_s = 0 point whose visibilities are undefined.
    bool include_degenerate = true;
};

struct WindowConfig
{
    bool calibrate = true;
    CoincidenceWindows windows;
    CalibrationOptions calibration;
};

struct TomographyConfig
{
    std::string settings = "overcomplete";  //!< or "minimal"
    double tol = 1e-10;
    int max_iter = 100000;
    int bootstrap = 200;

    std::vector<MeasurementSetting> measurement_settings() const;
    MleOptions mle() const;
};

struct ProtocolConfig
{
    int trials = 1000;
    double transmittance = 1;
};

struct ScalingConfig
{
    std::vector<double> transmittances{1, 0.5, 0.25, 0.125, 0.0625};
    double mu = 1e-3;
    double max_launch_mean = 1;
    int trials = 16;
};

//! Every tunable of every subcommand, with defaults.
struct RunConfig
{
    std::uint64_t seed = 1;
    NoiseModelParams noise;
    //! Fidelity gap applied to the outcome table.
    double overlap_penalty = 0;
    //! "model" (noise parameters) or "ideal" (Φ⁺).
    std::string outcomes = "model";
    std::optional<CountSummary> counts;
    ExperimentConfig experiment;
    WindowConfig windows;
    TomographyConfig tomography;
    OracleConfig oracle;
    ProtocolConfig protocol;
    ScalingConfig scaling;

    //! Canonical JSON with all defaults resolved.
    std::string dump() const;
    //! FNV-1a 64 of dump(), hex.
    std::string hash() const;
    void validate() const;

    static RunConfig parse(std::string const& text);
    static RunConfig load(std::string const& path);
};

}  // namespace dfs
