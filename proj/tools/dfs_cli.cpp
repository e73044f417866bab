// Command-line front end: predict, oracle, simulate, coincide, tomography,
// protocol, scaling and pipeline.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "dfs/app.hpp"
#include "dfs/fock.hpp"
#include "dfs/version.hpp"

namespace fs = std::filesystem;
using namespace dfs;

namespace
{
enum Exit
{
    kOk = 0,
    kFailure = 1,
    kConfig = 2,
    kData = 3,
    kNumeric = 4,
};

struct Options
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::string format = "records";
    std::string input;
};

RunConfig load(Options const& o)
{
    RunConfig c = o.config.empty() ? RunConfig{} : RunConfig::load(o.config);
    if (o.seed)
        c.seed = *o.seed;
    c.validate();
    return c;
}

TagFormat tag_format(Options const& o)
{
    return o.format == "text" ? TagFormat::Text : TagFormat::Records;
}

//! Writes to `out/name` and echoes to stdout.
template<class F>
void emit(Options const& o, std::string const& name, F&& write)
{
    fs::create_directories(o.out);
    std::ofstream f(fs::path(o.out) / name);
    if (!f)
        throw std::runtime_error("cannot write " + (fs::path(o.out) / name).string());
    write(f);
    write(std::cout);
}

int run(std::string const& cmd, Options const& o)
{
    RunConfig c = load(o);
    if (cmd == "predict")
    {
        auto r = run_predict(c);
        emit(o, "predict.txt", [&](std::ostream& os) { write_predict(os, c, r); });
    }
    else if (cmd == "oracle")
    {
        auto r = run_oracle(c);
        emit(o, "oracle.csv", [&](std::ostream& os) { write_oracle(os, c, r); });
        if (r.max_dev_z > 1e-6 || r.max_dev_x > 1e-6 || r.max_dev_xy > 1e-9)
        {
            std::cerr << "oracle and closed form disagree\n";
            return kNumeric;
        }
    }
    else if (cmd == "simulate")
    {
        fs::create_directories(o.out);
        auto path = fs::path(o.out) / (tag_format(o) == TagFormat::Text ? "tags.txt" : "tags.bin");
        auto s = run_simulate(c);
        write_streams(path, s, c, tag_format(o));
        std::cout << header_line(c, "simulate") << "\n"
                  << "wrote " << s.size() << " tags to " << path.string() << "\n";
    }
    else if (cmd == "coincide")
    {
        auto in = o.input.empty() ? (fs::path(o.out) / "tags.bin") : fs::path(o.input);
        auto r = run_coincide(c, read_streams(in));
        emit(o, "coincidences.csv", [&](std::ostream& os) { write_coincidences(os, c, r); });
    }
    else if (cmd == "tomography")
    {
        auto in = o.input.empty() ? (fs::path(o.out) / "coincidences.csv") : fs::path(o.input);
        auto r = run_tomography(c, read_counts(in));
        emit(o, "rho.txt", [&](std::ostream& os) { write_rho(os, c, r.mle.rho); });
        emit(o, "metrics.txt", [&](std::ostream& os) { write_tomography_metrics(os, c, r); });
    }
    else if (cmd == "protocol")
    {
        auto r = run_protocol_trials(c);
        emit(o, "protocol.txt", [&](std::ostream& os) { write_protocol(os, c, r); });
    }
    else if (cmd == "scaling")
    {
        auto r = run_scaling(c);
        emit(o, "scaling.csv", [&](std::ostream& os) { write_scaling(os, c, r); });
    }
    else if (cmd == "pipeline")
    {
        auto r = run_pipeline(c, o.out, tag_format(o));
        write_pipeline(std::cout, c, r);
    }
    return kOk;
}
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Decoherence-free subspace entanglement distribution toolkit"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Options o;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Root seed (overrides the config)");
        sub->add_option("--out", o.out, "Output directory");
        sub->add_option("--format", o.format, "Time-tag file format")
            ->check(CLI::IsMember({"text", "records"}));
    };

    std::vector<std::pair<std::string, std::string>> cmds = {
        {"predict", "Visibilities and fidelity from the closed-form model"},
        {"oracle", "Truncated-Fock oracle against the closed forms"},
        {"simulate", "Generate detector time-tag streams"},
        {"coincide", "Calibrate offsets and extract three-fold counts"},
        {"tomography", "Maximum-likelihood reconstruction from counts"},
        {"protocol", "Random collective-noise trials of the protocol"},
        {"scaling", "Success rate against fibre transmittance"},
        {"pipeline", "simulate, coincide and tomography end to end"},
    };
    for (auto const& [name, help] : cmds)
    {
        auto* sub = app.add_subcommand(name, help);
        add_common(sub);
        if (name == "coincide" || name == "tomography")
            sub->add_option("--input", o.input, "Input file");
    }

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    std::string cmd = app.get_subcommands().front()->get_name();
    try
    {
        return run(cmd, o);
    }
    catch (ConfigError const& e)
    {
        std::cerr << e.what() << "\n";
        return kConfig;
    }
    catch (DataError const& e)
    {
        std::cerr << e.what() << "\n";
        return kData;
    }
    catch (FormatError const& e)
    {
        std::cerr << e.what() << "\n";
        return kData;
    }
    catch (TruncationError const& e)
    {
        std::cerr << e.what() << "\n";
        return kNumeric;
    }
    catch (NoPeakError const& e)
    {
        std::cerr << e.what() << "\n";
        return kData;
    }
    catch (std::domain_error const& e)
    {
        std::cerr << e.what() << "\n";
        return kNumeric;
    }
    catch (std::overflow_error const& e)
    {
        std::cerr << e.what() << "\n";
        return kNumeric;
    }
    catch (std::invalid_argument const& e)
    {
        std::cerr << e.what() << "\n";
        return kData;
    }
    catch (std::exception const& e)
    {
        std::cerr << e.what() << "\n";
        return kFailure;
    }
}
