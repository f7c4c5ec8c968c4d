#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbc/barriers.hpp"
#include "cbc/pathfollow.hpp"
#include "cbc/sim.hpp"

namespace cbc {

/// Malformed or inconsistent scenario input.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Composition { none, softmin, product };

struct BarrierSpec {
  double p = 1.0;
  double r = 0.2;
  Composition composition = Composition::none;
  double lambda = 10.0;
};

struct ControlSpec {
  double kappa = 1.0;
  double kappa_v = 1.0;
  double kappa_w = 2.0;
  double alpha = 1.0;
  double epsilon = 0.0;
};

struct CorridorSweepSpec {
  std::vector<double> p_values;          // empty: barrier.p
  std::vector<double> alpha_over_kappa;  // empty: control.alpha / control.kappa
  std::vector<double> lambdas;           // empty: barrier.lambda
  double bbox_half_width = 0.0;          // 0: sensing range
  std::size_t member_samples = 0;
};

struct FollowSpec {
  std::optional<double> compare_alpha_over_kappa;
  std::size_t frames = 50;  // corridor dumps per run
  double goal_tol = 0.0;
  std::size_t n_samples = 0;
  double resolution = 0.05;
};

/// One barrier over the linear system's state.
struct StateBarrierSpec {
  enum class Kind { affine, power } kind = Kind::affine;
  Vec a;  // affine: a . x + b
  double b = 0.0;
  Vec q;  // power: ||x - q||^p - r^p
  double r = 0.0;
  double p = 2.0;
};

struct LorSpec {
  Mat a, b, c, k;
  std::vector<StateBarrierSpec> barriers;
  std::size_t candidates = 100;
  Vec y_lo, y_hi;
  /// alpha = alpha_fraction * ||A + B K|| unless alpha is given.
  double alpha_fraction = 0.5;
  std::optional<double> alpha;
  std::size_t max_trajectories = 3;
};

struct Scenario {
  std::filesystem::path base_dir;
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::optional<std::filesystem::path> world;
  std::vector<Vec2> obstacles;
  BarrierSpec barrier;
  ControlSpec control;
  SystemKind system = SystemKind::full;
  Vec initial_state;
  std::optional<Vec> goal;
  std::vector<Vec2> path;
  double dt = 1e-3;
  double duration = 10.0;
  CorridorSweepSpec corridor;
  FollowSpec follow;
  ExploreParams explore;
  std::optional<UnicyclePose> explore_start;
  LorSpec lor;
  std::optional<std::filesystem::path> out;
};

/// Parses and validates; file paths are resolved against base_dir.
[[nodiscard]] Scenario parse_scenario(const nlohmann::json& doc,
                                      const std::filesystem::path& base_dir);
/// Reads the JSON file, then parse_scenario with the file's directory.
[[nodiscard]] nlohmann::json read_scenario_json(const std::filesystem::path& file);
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& file);

/// Sets a dotted key ("control.alpha") in a scenario document, creating
/// intermediate objects.
void set_dotted(nlohmann::json& doc, const std::string& dotted_key, const nlohmann::json& value);

struct Sweep {
  std::string key;
  std::vector<nlohmann::json> values;
};

/// "key=v1,v2,..."; values parse as JSON when possible, else as strings.
[[nodiscard]] Sweep parse_sweep(const std::string& text);

/// Power-distance family over the scenario's obstacles (inline plus lidar hits
/// from the initial position when a world is given), composed per
/// barrier.composition.
[[nodiscard]] BarrierFamily scenario_family(const Scenario& s, double p, double lambda);
[[nodiscard]] std::vector<Vec2> scenario_obstacles(const Scenario& s);

}  // namespace cbc
