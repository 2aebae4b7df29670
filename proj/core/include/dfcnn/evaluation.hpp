#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dfcnn {

/// Binary confusion counts; the positive class is opacity (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  [[nodiscard]] std::uint64_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Items with probability >= threshold are predicted positive.
ConfusionMatrix confusion(std::span<const double> probabilities, std::span<const int> labels,
                          double threshold = 0.5);

/// A metric is nullopt when its denominator is zero.
using Metric = std::optional<double>;

struct Metrics {
  Metric acc;
  Metric sen;
  Metric spe;
  Metric f1;
};

Metrics metrics(const ConfusionMatrix& cm);

inline constexpr double kAptAccuracyWeight = 0.9;
inline constexpr double kAptParamsWeight = 0.1;
inline constexpr double kAptParamsNormalizer = 7.3;

/// 0.9 * acc - 0.1 * params_millions / 7.3
double apt(double acc, double params_millions);

struct MetricsReport {
  ConfusionMatrix cm;
  Metrics metrics;
  Metric apt;
  double params_millions = 0.0;
};

MetricsReport make_report(const ConfusionMatrix& cm, std::size_t param_count);

/// "undefined" for a missing value, otherwise the shortest round-trip decimal.
std::string format_metric(const Metric& value);
/// Inverse of format_metric; throws Error on malformed text.
Metric parse_metric(const std::string& text);

/// One row of the per-epoch training trace.
struct TraceRow {
  int epoch = 0;
  double train_loss = 0.0;
  Metric val_acc;
  Metric val_sen;
  Metric val_spe;
  Metric val_f1;
  Metric val_apt;

  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline constexpr const char* kTraceHeader =
    "epoch,train_loss,val_acc,val_sen,val_spe,val_f1,val_apt";

std::string trace_to_csv(std::span<const TraceRow> rows);
std::vector<TraceRow> trace_from_csv(const std::string& text);
void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

/// Accuracy history of another model, used to draw its APT curve next to ours.
struct ExternalModel {
  std::string name;
  std::vector<double> accuracy_per_epoch;
  double params_millions = 0.0;
};

/// Parses `[{"name": ..., "accuracy": [...], "params_millions": ...}, ...]`.
std::vector<ExternalModel> parse_external_models(const std::string& json_text);

struct AptPoint {
  std::string model;
  int epoch = 0;
  Metric acc;
  double params_millions = 0.0;
  Metric apt;
};

/// APT-vs-epoch series for the trained model followed by every external model.
std::vector<AptPoint> apt_series(const std::string& model_name,
                                 std::span<const TraceRow> trace, double params_millions,
                                 std::span<const ExternalModel> externals);

struct FoldSummary {
  std::string label;
  Metrics metrics;
};

/// Fold | Acc | Sen | Spe | F1 table with a Mean row over defined values.
std::string performance_table(std::span<const FoldSummary> folds);

struct ReportFiles {
  std::filesystem::path trace_csv;
  std::filesystem::path apt_csv;
  std::filesystem::path summary;
};

/// Writes <prefix>.trace.csv, <prefix>.apt.csv and <prefix>.summary.json.
ReportFiles emit_report(const std::filesystem::path& prefix, const std::string& model_name,
                        std::span<const TraceRow> trace, double params_millions,
                        std::span<const ExternalModel> externals);

}  // namespace dfcnn
