#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cbc/scenario.hpp"

namespace cbc {

enum class Command { corridor, follow, explore, lor };

[[nodiscard]] std::optional<Command> parse_command(const std::string& name);
const char* to_string(Command c);

/// Process exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitViolation = 3;
/// Anything unexpected (I/O failures, internal errors).
inline constexpr int kExitInternal = 1;

/// Thrown by a command once its outputs are written, when the run surfaced a
/// safety violation, a lost goal or a stuck exploration.
class RuntimeViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corridor polygons over the p x alpha/kappa (or lambda) grid at the initial
/// state: corridor_<panel>.txt, constraints_<panel>.csv, members_<panel>.csv,
/// obstacles.txt, corridor.json.
void cmd_corridor(const Scenario& s, const std::filesystem::path& out);

/// Path following plus the optional mismatched-rate comparison:
/// trajectory.csv, frames.csv, corridors.txt, goal_safety.csv, path.txt,
/// obstacles.txt, summary.json (and *_compare variants).
void cmd_follow(const Scenario& s, const std::filesystem::path& out);

/// Exploration log directory (see write_exploration_log).
void cmd_explore(const Scenario& s, const std::filesystem::path& out);

/// Output-regulation demo: candidates.csv, runs.csv, trajectory_NNN.csv, summary.json.
void cmd_lor(const Scenario& s, const std::filesystem::path& out);

void run_command(Command c, const Scenario& s, const std::filesystem::path& out);

/// Re-reads every file in `dir` with the matching parser; throws on the first
/// file that does not parse.
void self_check(const std::filesystem::path& dir);

/// Runs the command (with sweeps applied) and maps failures to exit codes,
/// writing diagnostics to `err`.
int run_cli(Command c, const std::filesystem::path& scenario_file,
            const std::optional<std::filesystem::path>& out,
            const std::vector<std::string>& sweeps, std::ostream& log, std::ostream& err);

}  // namespace cbc
