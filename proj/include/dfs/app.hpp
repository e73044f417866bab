#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dfs/config.hpp"
#include "dfs/protocol.hpp"
#include "dfs/timetag.hpp"
#include "dfs/tomography.hpp"

namespace dfs
{
//! Input files that are missing or malformed.
struct DataError : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

enum class TagFormat
{
    Records,
    Text
};

//! `# dfs <version> <command> config_hash=<h> seed=<s>`
std::string header_line(RunConfig const& c, std::string const& command);

struct PredictResult
{
    NoiseModelParams params;
    std::optional<ParamEstimate> estimate;
    double vz = 0, vx = 0, vy = 0, fidelity = 0;
};
PredictResult run_predict(RunConfig const& c);
void write_predict(std::ostream& os, RunConfig const& c, PredictResult const& r);

struct OracleRow
{
    double chi_s = 0, chi_n = 0, g2_s = 0;
    std::optional<double> vz, vx, vy;
    std::optional<double> vz_closed, vx_closed;
    double max_leakage = 0;
};
struct OracleReport
{
    std::vector<OracleRow> rows;
    double max_dev_z = 0;
    double max_dev_x = 0;
    double max_dev_xy = 0;
    int undefined = 0;
};
//! Random triples drawn from the configured ranges, plus the default point.
OracleReport run_oracle(RunConfig const& c);
void write_oracle(std::ostream& os, RunConfig const& c, OracleReport const& r);

OutcomeTable outcome_table(RunConfig const& c);
Streams run_simulate(RunConfig const& c);
void write_streams(std::filesystem::path const& path, Streams const& s,
                   RunConfig const& c, TagFormat f);
//! Picks the format from the extension: `.txt` is text, anything else records.
Streams read_streams(std::filesystem::path const& path);

struct CoincideResult
{
    CoincidenceWindows windows;
    ThreefoldResult threefold;
};
CoincideResult run_coincide(RunConfig const& c, Streams const& s);
void write_coincidences(std::ostream& os, RunConfig const& c, CoincideResult const& r);
//! Reads `setting,m,n,count` or `m,n,count` rows.
TomographyData read_counts(std::filesystem::path const& path);

struct TomographyReport
{
    MleResult mle;
    double fidelity = 0;
    PhaseFidelity phase;
    BootstrapResult bootstrap;
    double total_counts = 0;
};
TomographyReport run_tomography(RunConfig const& c, TomographyData const& data);
void write_rho(std::ostream& os, RunConfig const& c, CMatrix const& rho);
void write_tomography_metrics(std::ostream& os, RunConfig const& c,
                              TomographyReport const& r);

struct ProtocolReport
{
    int trials = 0;
    double max_fidelity_error = 0;
    double max_probability_error = 0;
    double mean_success = 0;
};
ProtocolReport run_protocol_trials(RunConfig const& c);
void write_protocol(std::ostream& os, RunConfig const& c, ProtocolReport const& r);

struct ScalingReport
{
    std::vector<ScalingRow> single, coherent;
    double slope_single = 0, slope_coherent = 0;
};
ScalingReport run_scaling(RunConfig const& c);
void write_scaling(std::ostream& os, RunConfig const& c, ScalingReport const& r);

struct PipelineReport
{
    CoincideResult coincide;
    TomographyReport tomography;
    double predicted_fidelity = 0;
    //! |F − prediction| / σ_bootstrap.
    double z_score = 0;
};
/*!
 * simulate → coincide → tomography through files in `out`:
 * tags.bin (+.json) or tags.txt, coincidences.csv, rho.txt, metrics.txt,
 * pipeline.txt.
 */
PipelineReport run_pipeline(RunConfig const& c, std::filesystem::path const& out,
                            TagFormat f);
void write_pipeline(std::ostream& os, RunConfig const& c, PipelineReport const& r);

}  // namespace dfs
