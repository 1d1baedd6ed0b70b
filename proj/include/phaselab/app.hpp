#pragma once

#include "phaselab/config.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phaselab::app {

/// Entry point of the `phaselab` executable. Returns the process exit code:
/// 0 success, 2 configuration or input error, 3 numerical failure.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct Context {
    config::RunConfig cfg;
    std::filesystem::path out_dir;
    unsigned threads = 1;
};

struct AnalyzeInputs {
    std::optional<std::filesystem::path> manifest;
    std::optional<std::filesystem::path> sweep;
    std::optional<std::filesystem::path> hist_dir;
    std::optional<std::filesystem::path> table1;
};

// Each command writes its files plus `<command>_manifest.json` into
// ctx.out_dir and returns the manifest.
nlohmann::json command_mode(const Context& ctx);
nlohmann::json command_mirror(const Context& ctx);
nlohmann::json command_simulate(const Context& ctx);
nlohmann::json command_analyze(const Context& ctx, const AnalyzeInputs& in);

}  // namespace phaselab::app
