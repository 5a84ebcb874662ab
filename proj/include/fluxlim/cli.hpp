#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fluxlim/config.hpp"

namespace fluxlim {

inline constexpr const char* kToolVersion = "1.0.0";

// process exit codes
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitFail = 2;
inline constexpr int kExitHypothesis = 3;
inline constexpr int kExitRuntime = 4;

struct GlobalOptions {
    std::string output_dir; // overrides [output] dir when nonempty
    bool strict_hypotheses = false;
    std::uint64_t seed = 1;
};

enum class Command { Solve, Jko, Verify };

struct RunOutcome {
    int exit_code = kExitOk;
    std::vector<PrincipleReport> reports;
    std::string error;
};

int exit_code_for(const std::vector<PrincipleReport>& reports, bool strict_hypotheses);

/// Runs one configured experiment and writes its output directory.
RunOutcome execute(const ExperimentConfig& cfg, Command cmd, const GlobalOptions& opts, const std::string& out_dir,
                   std::ostream& out);

int cmd_run(Command cmd, const std::string& config_path, const GlobalOptions& opts, std::ostream& out,
            std::ostream& err);

/// `section.key=v1,v2,...` (values split on `;` instead when any is present)
std::pair<std::string, std::vector<std::string>> parse_sweep_param(const std::string& text);

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& params, const GlobalOptions& opts,
              std::ostream& out, std::ostream& err);

/// Entry point of the `fluxlim` executable.
int cli_main(int argc, char** argv);

} // namespace fluxlim
