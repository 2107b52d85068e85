#pragma once

// Command-line front end. Every subcommand resolves its configuration as
// defaults <- JSON config file <- flags and echoes the result as config.json
// into its output directory.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadowae/eval.hpp"
#include "shadowae/phantom.hpp"
#include "shadowae/trainer.hpp"

namespace shadowae::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

struct SynthConfig {
  PhantomSpec spec;
  std::size_t n_train = 2000;
  std::size_t n_eval = 100;
  std::uint64_t seed = 1;
  std::filesystem::path out_dir;
};

struct EvalConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path corpus;
  std::filesystem::path out_dir;
  /// Fixed threshold; when unset tau is selected over tau_grid.
  std::optional<double> tau;
  std::vector<double> tau_grid = default_tau_grid();
  /// Fixed baseline threshold; when unset and baseline_select is true, the
  /// baseline threshold is selected over baseline_grid.
  std::optional<double> baseline_threshold;
  bool baseline_select = false;
  std::vector<double> baseline_grid;  // empty = 0.01 .. 0.99 in steps of 0.01
  /// Number of eval images to write overlay PNGs for.
  std::size_t overlays = 0;
};

struct InferConfig {
  std::filesystem::path checkpoint;
  std::filesystem::path image;
  std::filesystem::path out_dir;
  double tau = 0.5;
};

struct EvalOutcome {
  EvalReport proposed;
  std::optional<ThresholdChoice> tau_selection;
  std::optional<EvalReport> baseline;
  std::optional<ThresholdChoice> baseline_selection;
  /// Per eval image: predicted-shadow pixels on dark cavities outside the
  /// truth, and the cavity size.
  std::vector<std::size_t> cavity_false_positives;
  std::vector<std::size_t> cavity_pixels;
};

std::vector<double> fine_grid();

void run_synth(const SynthConfig& cfg);
FitResult run_train(const TrainConfig& cfg);
EvalOutcome run_eval(const EvalConfig& cfg);
void run_infer(const InferConfig& cfg);

struct SweepRow {
  std::size_t run = 0;
  nlohmann::ordered_json overrides;
  double tau = 0.0;
  MeanStd iou, dice;
};

/// Trains and evaluates every point of the cartesian grid (key -> list of
/// values, keys are '/'-separated paths into the train config). Rows come
/// back sorted by mean IoU, descending, ties in grid order.
std::vector<SweepRow> run_sweep(const TrainConfig& base, const nlohmann::ordered_json& grid,
                                const EvalConfig& eval_base, const std::filesystem::path& out_dir);

nlohmann::json outcome_json(const EvalOutcome& o);
std::string outcome_csv(const EvalOutcome& o);

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);
void to_json(nlohmann::json& j, const EvalConfig& c);
void from_json(const nlohmann::json& j, EvalConfig& c);
void to_json(nlohmann::json& j, const InferConfig& c);
void from_json(const nlohmann::json& j, InferConfig& c);

/// Entry point: argv[0] is the program name. Returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string version_string();

}  // namespace shadowae::cli
