#include "dfcnn/evaluation.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dfcnn/tensor.hpp"

namespace dfcnn {

ConfusionMatrix confusion(std::span<const double> probabilities, std::span<const int> labels,
                          double threshold) {
  if (probabilities.size() != labels.size()) {
    throw Error("confusion: " + std::to_string(probabilities.size()) + " predictions for " +
                std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw Error("confusion: labels must be 0 or 1");
    const bool positive = probabilities[i] >= threshold;
    if (labels[i] == 1) {
      positive ? ++cm.tp : ++cm.fn;
    } else {
      positive ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

namespace {

Metric ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics metrics(const ConfusionMatrix& cm) {
  Metrics m;
  m.acc = ratio(cm.tp + cm.tn, cm.total());
  m.sen = ratio(cm.tp, cm.tp + cm.fn);
  m.spe = ratio(cm.tn, cm.tn + cm.fp);
  m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return m;
}

double apt(double acc, double params_millions) {
  if (!(params_millions > 0.0)) throw Error("apt: parameter count must be positive");
  return kAptAccuracyWeight * acc - kAptParamsWeight * params_millions / kAptParamsNormalizer;
}

MetricsReport make_report(const ConfusionMatrix& cm, std::size_t param_count) {
  MetricsReport r;
  r.cm = cm;
  r.metrics = metrics(cm);
  r.params_millions = static_cast<double>(param_count) / 1e6;
  if (r.metrics.acc) r.apt = apt(*r.metrics.acc, r.params_millions);
  return r;
}

std::string format_metric(const Metric& value) {
  if (!value) return "undefined";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, *value);
  return std::string(buf, res.ptr);
}

Metric parse_metric(const std::string& text) {
  if (text == "undefined") return std::nullopt;
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
    throw Error("malformed metric value '" + text + "'");
  }
  return v;
}

std::string trace_to_csv(std::span<const TraceRow> rows) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const TraceRow& r : rows) {
    out += std::to_string(r.epoch) + "," + format_metric(r.train_loss) + "," +
           format_metric(r.val_acc) + "," + format_metric(r.val_sen) + "," +
           format_metric(r.val_spe) + "," + format_metric(r.val_f1) + "," +
           format_metric(r.val_apt) + "\n";
  }
  return out;
}

std::vector<TraceRow> trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error("trace CSV: missing or unexpected header");
  }
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    if (cells.size() != 7) throw Error("trace CSV: expected 7 columns in '" + line + "'");
    TraceRow r;
    int epoch = 0;
    auto res = std::from_chars(cells[0].data(), cells[0].data() + cells[0].size(), epoch);
    if (res.ec != std::errc{} || res.ptr != cells[0].data() + cells[0].size()) {
      throw Error("trace CSV: bad epoch '" + cells[0] + "'");
    }
    r.epoch = epoch;
    const Metric loss = parse_metric(cells[1]);
    if (!loss) throw Error("trace CSV: train_loss cannot be undefined");
    r.train_loss = *loss;
    r.val_acc = parse_metric(cells[2]);
    r.val_sen = parse_metric(cells[3]);
    r.val_spe = parse_metric(cells[4]);
    r.val_f1 = parse_metric(cells[5]);
    r.val_apt = parse_metric(cells[6]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json metric_json(const Metric& m) {
  return m ? nlohmann::json(*m) : nlohmann::json("undefined");
}

}  // namespace

void write_trace_csv(const std::filesystem::path& path, std::span<const TraceRow> rows) {
  write_text(path, trace_to_csv(rows));
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  return trace_from_csv(read_text(path));
}

std::vector<ExternalModel> parse_external_models(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(std::string("external models: ") + e.what());
  }
  if (!doc.is_array()) throw Error("external models: expected a JSON array");
  std::vector<ExternalModel> models;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("name") || !item["name"].is_string() ||
        !item.contains("accuracy") || !item["accuracy"].is_array() ||
        !item.contains("params_millions") || !item["params_millions"].is_number()) {
      throw Error("external models: each entry needs name, accuracy[], params_millions");
    }
    ExternalModel m;
    m.name = item["name"].get<std::string>();
    m.params_millions = item["params_millions"].get<double>();
    if (!(m.params_millions > 0.0)) {
      throw Error("external model '" + m.name + "': params_millions must be positive");
    }
    for (const auto& a : item["accuracy"]) {
      if (!a.is_number()) throw Error("external model '" + m.name + "': non-numeric accuracy");
      const double acc = a.get<double>();
      if (acc < 0.0 || acc > 1.0) {
        throw Error("external model '" + m.name + "': accuracy outside [0, 1]");
      }
      m.accuracy_per_epoch.push_back(acc);
    }
    models.push_back(std::move(m));
  }
  return models;
}

std::vector<AptPoint> apt_series(const std::string& model_name,
                                 std::span<const TraceRow> trace, double params_millions,
                                 std::span<const ExternalModel> externals) {
  std::vector<AptPoint> points;
  for (const TraceRow& r : trace) {
    AptPoint p{model_name, r.epoch, r.val_acc, params_millions, std::nullopt};
    if (r.val_acc) p.apt = apt(*r.val_acc, params_millions);
    points.push_back(p);
  }
  for (const ExternalModel& m : externals) {
    for (std::size_t e = 0; e < m.accuracy_per_epoch.size(); ++e) {
      const double acc = m.accuracy_per_epoch[e];
      points.push_back({m.name, static_cast<int>(e + 1), acc, m.params_millions,
                        apt(acc, m.params_millions)});
    }
  }
  return points;
}

std::string performance_table(std::span<const FoldSummary> folds) {
  std::ostringstream os;
  auto cell = [&os](const Metric& m) {
    os << " | " << std::setw(9);
    if (m) {
      os << std::fixed << std::setprecision(4) << *m;
    } else {
      os << "undefined";
    }
  };
  os << std::left << std::setw(8) << "Fold" << std::right << " | " << std::setw(9) << "Acc"
     << " | " << std::setw(9) << "Sen" << " | " << std::setw(9) << "Spe" << " | "
     << std::setw(9) << "F1" << '\n';
  Metrics sum{0.0, 0.0, 0.0, 0.0};
  int counts[4] = {0, 0, 0, 0};
  for (const FoldSummary& f : folds) {
    os << std::left << std::setw(8) << f.label << std::right;
    const Metric* values[4] = {&f.metrics.acc, &f.metrics.sen, &f.metrics.spe, &f.metrics.f1};
    Metric* totals[4] = {&sum.acc, &sum.sen, &sum.spe, &sum.f1};
    for (int k = 0; k < 4; ++k) {
      cell(*values[k]);
      if (*values[k]) {
        **totals[k] += **values[k];
        ++counts[k];
      }
    }
    os << '\n';
  }
  os << std::left << std::setw(8) << "Mean" << std::right;
  const Metric* totals[4] = {&sum.acc, &sum.sen, &sum.spe, &sum.f1};
  for (int k = 0; k < 4; ++k) {
    cell(counts[k] > 0 ? Metric(**totals[k] / counts[k]) : std::nullopt);
  }
  os << '\n';
  return os.str();
}

ReportFiles emit_report(const std::filesystem::path& prefix, const std::string& model_name,
                        std::span<const TraceRow> trace, double params_millions,
                        std::span<const ExternalModel> externals) {
  ReportFiles files{prefix.string() + ".trace.csv", prefix.string() + ".apt.csv",
                    prefix.string() + ".summary.json"};
  write_trace_csv(files.trace_csv, trace);

  std::string apt_csv = "model,epoch,acc,params_millions,apt\n";
  for (const AptPoint& p : apt_series(model_name, trace, params_millions, externals)) {
    apt_csv += p.model + "," + std::to_string(p.epoch) + "," + format_metric(p.acc) + "," +
               format_metric(p.params_millions) + "," + format_metric(p.apt) + "\n";
  }
  write_text(files.apt_csv, apt_csv);

  nlohmann::json summary;
  summary["model"] = model_name;
  summary["params_millions"] = params_millions;
  summary["epochs"] = trace.size();
  if (!trace.empty()) {
    const TraceRow& last = trace.back();
    summary["final"] = {{"epoch", last.epoch},
                        {"train_loss", last.train_loss},
                        {"acc", metric_json(last.val_acc)},
                        {"sen", metric_json(last.val_sen)},
                        {"spe", metric_json(last.val_spe)},
                        {"f1", metric_json(last.val_f1)},
                        {"apt", metric_json(last.val_apt)}};
  }
  nlohmann::json others = nlohmann::json::array();
  for (const ExternalModel& m : externals) {
    others.push_back({{"name", m.name},
                      {"params_millions", m.params_millions},
                      {"epochs", m.accuracy_per_epoch.size()}});
  }
  summary["external_models"] = others;
  write_text(files.summary, summary.dump(2) + "\n");
  return files;
}

}  // namespace dfcnn
