#include "phaselab/app.hpp"

#include "phaselab/errors.hpp"
#include "phaselab/io.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <thread>

namespace phaselab::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

config::RunConfig config_from_manifest(const fs::path& manifest) {
    json m;
    try {
        m = json::parse(io::read_file(manifest));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("{}: {}", manifest.string(), e.what()));
    }
    if (!m.is_object() || !m.contains("config")) {
        throw ConfigError(fmt::format("{} carries no config", manifest.string()));
    }
    return config::parse_config(m.at("config"));
}

}  // namespace

int run(int argc, char** argv) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(args, std::cout, std::cerr);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Phase-controlled emission in a mirror-terminated waveguide", "phaselab"};
    app.require_subcommand(1);

    std::string config_path, preset_name, out_dir;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    auto* o_config = app.add_option("--config", config_path, "JSON run configuration");
    auto* o_preset = app.add_option("--preset", preset_name, "built-in parameter set: default or qd1");
    auto* o_seed = app.add_option("--seed", seed, "RNG seed (overrides the config)");
    auto* o_out = app.add_option("--out", out_dir, "output directory (overrides the config)");
    app.add_option("--threads", threads, "worker threads, 0 for all cores")->capture_default_str();
    o_config->excludes(o_preset);

    auto* c_mode = app.add_subcommand("mode", "solve the guided mode and export visibility curves");
    auto* c_mirror = app.add_subcommand("mirror", "transfer-matrix sweep of the hole-array mirror");
    auto* c_sim = app.add_subcommand("simulate", "generate a synthetic voltage sweep");
    auto* c_an = app.add_subcommand("analyze", "fit a sweep or a lifetime table and bound the parameters");
    auto* c_cfg = app.add_subcommand("config", "print the resolved configuration as JSON");
    AnalyzeInputs in;
    std::string manifest, sweep, hist_dir, table1;
    auto* o_manifest = c_an->add_option("--manifest", manifest, "simulate_manifest.json to analyse");
    auto* o_sweep = c_an->add_option("--sweep", sweep, "sweep CSV (voltage,phi_rad,intensity_counts)");
    auto* o_hist = c_an->add_option("--hist-dir", hist_dir, "directory of hist_*.csv files (t_ns,counts)");
    auto* o_table = c_an->add_option("--table1", table1, "lifetime table CSV");
    o_hist->needs(o_sweep);
    o_manifest->excludes(o_sweep)->excludes(o_table);
    o_sweep->excludes(o_table);
    for (auto* sub : {c_mode, c_mirror, c_sim, c_an, c_cfg}) sub->fallthrough();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (*o_manifest) in.manifest = manifest;
        if (*o_sweep) in.sweep = sweep;
        if (*o_hist) in.hist_dir = hist_dir;
        if (*o_table) in.table1 = table1;

        config::RunConfig cfg;
        if (*o_config) {
            cfg = config::load_config(config_path);
        } else if (*o_preset) {
            cfg = config::preset(preset_name);
        } else if (c_an->parsed() && in.manifest) {
            cfg = config_from_manifest(*in.manifest);
        } else {
            cfg = config::preset("default");
        }
        if (*o_seed) cfg.seed = seed;

        Context ctx;
        ctx.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
        if (*o_out) {
            ctx.out_dir = out_dir;
        } else if (c_an->parsed() && in.manifest) {
            ctx.out_dir = in.manifest->parent_path() / "analysis";
        } else {
            ctx.out_dir = cfg.output_dir;
        }
        ctx.cfg = cfg;

        if (c_cfg->parsed()) {
            out << config::to_json(cfg).dump(2) << "\n";
            return 0;
        }
        json manifest_out;
        if (c_mode->parsed()) manifest_out = command_mode(ctx);
        if (c_mirror->parsed()) manifest_out = command_mirror(ctx);
        if (c_sim->parsed()) manifest_out = command_simulate(ctx);
        if (c_an->parsed()) manifest_out = command_analyze(ctx, in);
        out << fmt::format("{}: wrote {} files to {}\n", manifest_out.at("command").get<std::string>(),
                           manifest_out.at("files").size(), ctx.out_dir.string());
        return 0;
    } catch (const InputError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace phaselab::app
