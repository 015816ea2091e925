#pragma once

// Seeded experiment sweeps and their reports.
//
// A configuration is a JSON document (format version 1), for example
//
//   {
//     "version": 1,
//     "experiment": "spammer",
//     "generator": {"num_voters_per_attr": [200, 0], "num_tasks": 300},
//     "methods": [{"model": "mv", "fairness": "none"},
//                 {"model": "soft_ds", "fairness": "none"}],
//     "hyper": {"alpha": [[4, 1], [1, 4]], "rho": [1, 1]},
//     "sweep": {"num_spammers": [0, 50, 200, 500]},
//     "seeds": {"start": 0, "count": 20},
//     "output_dir": "results/spammer"
//   }
//
// See README.md for every key.

#include "fairagg/pipeline.hpp"
#include "fairagg/synthgen.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fairagg {

inline constexpr int kConfigVersion = 1;
/// Environment variable naming the default output directory.
inline constexpr const char* kOutDirEnv = "FAIRAGG_OUT_DIR";

enum class ExperimentKind { soft_label, spammer, fairness_synthetic, flip_semi_synthetic, aggregate_file };

std::string_view library_version();

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment(std::string_view name);

struct Method {
    ModelKind model = ModelKind::mv;
    FairnessOption fairness = FairnessOption::none;
};

/// Sweep axes. An empty axis is not swept.
struct Sweep {
    std::vector<int> num_tasks;
    std::vector<int> num_spammers;
    std::vector<int> voters0;
    std::vector<int> voter_ratio;
    std::vector<double> flip_rate;
};

/// One sweep point; unset fields are not applicable to the experiment.
struct SweepPoint {
    std::optional<int> num_tasks;
    std::optional<int> num_spammers;
    std::optional<int> voters0;
    std::optional<int> voter_ratio;
    std::optional<double> flip_rate;
};

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::soft_label;
    GenSpec generator;
    std::vector<Method> methods;
    ModelSettings settings;
    Sweep sweep;
    std::vector<std::uint64_t> seeds{0};
    std::filesystem::path labels_path;
    std::filesystem::path attributes_path;
    std::filesystem::path truth_path;  ///< aggregate_file only, optional
    std::array<double, 2> ideal_dist{0.5, 0.5};
    /// Preferred class (1-based) of each attribute group when flipping.
    std::array<int, 2> flip_class{1, 2};
    std::array<double, 2> keep_fraction{1.0, 0.5};
    std::string output_dir;
    /// Canonical JSON text of the configuration, hashed into the manifest.
    std::string canonical;
};

/// Parses and validates a configuration. Relative input paths are resolved
/// against `base_dir`. Throws ConfigError.
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Sweep points in canonical order (axes nested in declaration order, values
/// ascending).
std::vector<SweepPoint> sweep_points(const ExperimentConfig& config);

struct MetricsRow {
    std::string experiment;
    Method method;
    std::uint64_t seed = 0;
    SweepPoint point;
    double mae = 0.0;
    double mae_class1 = 0.0;
    double bias = 0.0;
    /// False when there is no reference to score against (metrics left blank).
    bool scored = true;
    std::string status = "ok";  ///< "ok" or "error"
    std::string message;
};

struct RunOptions {
    int workers = 1;
    bool emit_soft_labels = false;
    /// Overrides the configured output directory when non-empty.
    std::filesystem::path out_dir;
};

struct RunReport {
    std::vector<MetricsRow> rows;
    std::filesystem::path out_dir;
    std::vector<std::filesystem::path> files;
};

/// Executes the sweep and writes metrics.csv, manifest.json and optionally
/// soft labels under the output directory.
RunReport run(const ExperimentConfig& config, const RunOptions& options = {});

/// Output directory: explicit override, then the config, then $FAIRAGG_OUT_DIR,
/// then "fairagg-out".
std::filesystem::path resolve_out_dir(const ExperimentConfig& config, const std::filesystem::path& override_dir);

std::string metrics_csv(const std::vector<MetricsRow>& rows);
std::uint64_t fnv1a64(std::string_view text);

struct CompareRow {
    std::string key;
    double mae_delta = 0.0;
    double bias_delta = 0.0;
    bool exceeds = false;
};

struct CompareResult {
    std::vector<CompareRow> rows;
    double max_delta = 0.0;
    bool ok = true;
};

/// Row-by-row MAE and bias deltas of two metrics CSVs. Throws
/// ValidationError when the files do not cover the same rows.
CompareResult compare(const std::filesystem::path& report_a, const std::filesystem::path& report_b,
                      double threshold);
CompareResult compare_csv(const std::string& csv_a, const std::string& csv_b, double threshold);

}  // namespace fairagg
