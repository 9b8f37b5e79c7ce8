#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "semcom/attack.hpp"
#include "semcom/training.hpp"

namespace semcom {

enum class ExperimentKind { TaskAccuracyVsSnr, ReconstructionVsSnr, SensingVsSnr, AccuracyVsPsr };

std::string_view to_string(ExperimentKind kind);
ExperimentKind parse_experiment_kind(std::string_view name);

struct DataOptions {
    /// Directory of CIFAR-10 binary batches.
    std::string path;
    bool synthetic = false;
    /// Stratified training subset size (0 = all).
    std::size_t subset = 5000;
    /// Stratified test subset size (0 = all).
    std::size_t test_subset = 2000;
    std::size_t synthetic_side = 8;
    std::size_t synthetic_train = 5000;
    std::size_t synthetic_test = 1000;
};

struct ExperimentConfig {
    std::vector<ExperimentKind> experiments{ExperimentKind::TaskAccuracyVsSnr};
    std::vector<double> snr_grid{-5, 0, 5, 10, 15};
    std::vector<std::size_t> nc_grid{10, 20, 40};
    std::vector<double> psr_grid{-30, -25, -20, -15, -10, -5};
    std::vector<double> sensing_snr_grid{-40, -5, 0, 5, 10, 15};
    /// Single-model settings; train.cfg.n_c and train.channel.snr_db are the
    /// operating point for train/evaluate/attack.
    TrainConfig train;
    DataOptions data;
    EvalOptions eval;
    std::filesystem::path out = "out";
    std::size_t workers = 1;

    std::uint64_t seed() const { return train.seed; }
    /// Throws ConfigError naming the offending key.
    void validate() const;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dotted key -> textual value, e.g. "channel.snr_db" -> "10".
using RawConfig = std::map<std::string, std::string>;

/// Every recognised key with its default value.
RawConfig default_raw_config();

/// Overlays `key = value` lines (with optional [section] headers) onto
/// `raw`. Unknown keys are errors.
void overlay_config_text(std::istream& in, RawConfig& raw, const std::string& source);
void overlay_config_file(const std::filesystem::path& path, RawConfig& raw);

/// Typed, validated configuration. Errors name the key.
ExperimentConfig resolve_config(const RawConfig& raw);

/// Re-parsable text holding every resolved value.
std::string render_config(const ExperimentConfig& config);

struct Datasets {
    Dataset train;
    Dataset test;
};

Datasets load_datasets(const ExperimentConfig& config);

/// Model dimensions for one grid point, with the input shape of the data.
ModelConfig model_config(const ExperimentConfig& config, std::size_t n_c);

/// One emitted CSV row.
struct MetricsRow {
    ChannelKind channel = ChannelKind::AWGN;
    double snr_db = 0.0;
    std::size_t n_c = 0;
    std::optional<double> psr_db;
    std::optional<double> task_accuracy;
    std::optional<double> reconstruction_mse;
    std::optional<double> sensing_accuracy;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
    std::optional<AttackKind> attack;
};

inline constexpr std::string_view kMetricsHeader =
    "channel,snr_db,n_c,psr_db,task_accuracy,reconstruction_mse,sensing_accuracy,seed,samples";
inline constexpr std::string_view kHistoryHeader = "epoch,semantic_ce,reconstruction_mse,sensing_ce,total";

std::string format_row(const MetricsRow& row);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows, bool with_attack);
void write_history_csv(const std::filesystem::path& path, const std::vector<LossBreakdown>& history);

struct RunReport {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> errors;
    bool ok() const { return errors.empty(); }
};

/// Runs every requested experiment, writing resolved.cfg, one CSV per
/// experiment, per-point training histories and two-column .dat curves
/// under config.out. Grid points run on config.workers threads; a failed
/// point is reported with its grid coordinates and the rows that did
/// complete are still written.
RunReport run_experiment(const ExperimentConfig& config, std::ostream& log);

struct CurveVerdict {
    std::string file;
    std::string curve;
    std::string metric;
    bool increasing = true;
    bool pass = true;
    std::vector<std::string> violations;
};

class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Allowed dip below the running maximum of an accuracy curve.
inline constexpr double kAccuracyTolerance = 0.02;
/// Allowed relative rise above the running minimum of an MSE curve.
inline constexpr double kMseTolerance = 0.05;

/// Verdict for y over sorted x: increasing curves need every point within
/// `tolerance` (absolute) of the running maximum; decreasing curves need
/// every point at most (1 + tolerance) times the running minimum.
CurveVerdict check_trend(const std::vector<std::pair<double, double>>& points, bool increasing, double tolerance,
                         bool relative);

/// Trend verdicts for metrics CSVs: accuracy columns must rise with SNR,
/// reconstruction MSE must fall, and attacked accuracy must fall with PSR.
std::vector<CurveVerdict> summarize(const std::vector<std::filesystem::path>& csv_paths);

}  // namespace semcom
