#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stlf/experiments.hpp"
#include "stlf/features.hpp"
#include "stlf/neural.hpp"

namespace stlf::cli {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "STLF_OUTPUT_ROOT";

[[nodiscard]] const std::vector<std::string>& command_names();

/// Every key the config accepts, with its default value.
[[nodiscard]] json default_config();

/// Applies one `a.b.c=value` override in place. The value is parsed as JSON when it
/// parses, otherwise taken as a string. Numeric path segments index arrays; an index
/// equal to the array size appends.
void apply_override(json& config, const std::string& assignment);

/// Deep-merges `user` over the defaults, applies overrides and rejects unknown keys.
[[nodiscard]] json resolve_config(const json& user, const std::vector<std::string>& overrides);

struct StationEntry {
  std::string id;
  std::optional<fs::path> load;
  std::optional<fs::path> temp;
  std::optional<double> lat;
  std::optional<double> lon;
  std::map<std::string, double> factors;
};

/// One entry of a condition list; `best` is resolved per station from its lead sweep.
struct ConditionEntry {
  bool best{false};
  features::TemperatureCondition condition;
};

struct CostBenefitMethod {
  std::string name;
  double mape{0.0};
};

struct Config {
  json resolved;
  fs::path base_dir;

  std::optional<fs::path> output_dir;
  std::vector<StationEntry> stations;
  std::optional<fs::path> station_meta;

  features::CalendarConfig calendar;
  int n_points{32};
  features::DayLabelScheme scheme{features::DayLabelScheme::EightType};
  std::vector<ConditionEntry> window_conditions;

  neural::ModelConfig model;
  neural::TrainConfig train;
  int train_stride{1};
  std::optional<std::string> train_station;

  std::set<features::Season> train_seasons;
  std::set<features::Season> test_seasons;
  std::optional<experiments::TimeOfDayWindow> exclusion;

  std::vector<int> step1_lengths;
  std::vector<neural::CellKind> step1_cells;
  std::vector<features::DayLabelScheme> step2_schemes;
  bool step3_auto{true};
  std::vector<features::TemperatureCondition> step3_conditions;
  std::vector<experiments::RotationPlan> rotation_plans;

  double cb_annual_twh{0.0};
  double cb_tariff{0.0};
  std::optional<int> cb_significant_figures;
  double cb_baseline{0.0};
  std::vector<CostBenefitMethod> cb_methods;

  std::vector<experiments::SynthSpec> synth_stations;

  std::optional<fs::path> ingest_grid;
  int ingest_step_minutes{30};

  std::optional<fs::path> evaluate_checkpoint;
  std::optional<std::string> evaluate_station;
};

/// Validates every field of a resolved config. Relative paths are taken against
/// `base_dir`. Throws ConfigError naming the offending field path.
[[nodiscard]] Config parse_config(const json& resolved, const fs::path& base_dir);

/// Reads a JSON config file (comments allowed) and resolves it.
[[nodiscard]] Config load_config(const fs::path& path, const std::vector<std::string>& overrides);

struct RunOutcome {
  int exit_code{0};
  /// Fresh directory holding the artifacts; empty when the command failed.
  fs::path output_dir;
  std::string message;
};

struct RunOptions {
  std::optional<fs::path> output_root;
  std::ostream* log{nullptr};
};

/// Runs one command. Exit codes: 0 success, 2 configuration error, 3 data error,
/// 4 numeric divergence, 1 anything else.
[[nodiscard]] RunOutcome run(const std::string& command, const std::optional<fs::path>& config_path,
                             const std::vector<std::string>& overrides, const RunOptions& options = {});

}  // namespace stlf::cli
