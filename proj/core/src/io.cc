#include "daca/io.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <type_traits>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#ifndef DACA_VERSION
#define DACA_VERSION "0.0.0"
#endif

namespace daca {
namespace {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

[[noreturn]] void ParseFail(const std::string& source, std::size_t line,
                            const std::string& reason) {
  Fail(ErrorCode::kParse, source + ":" + std::to_string(line) + ": " + reason);
}

std::vector<double> ReadLogitArray(const nlohmann::json& obj, const char* field,
                                   std::size_t k, const std::string& source,
                                   std::size_t line) {
  const auto it = obj.find(field);
  if (it == obj.end()) ParseFail(source, line, std::string("missing field '") + field + "'");
  if (!it->is_array()) ParseFail(source, line, std::string("field '") + field + "' is not an array");
  if (it->size() != k) {
    ParseFail(source, line, std::string("field '") + field + "' has " +
                                std::to_string(it->size()) + " entries, expected k=" +
                                std::to_string(k));
  }
  std::vector<double> out;
  out.reserve(k);
  for (const auto& v : *it) {
    if (!v.is_number()) ParseFail(source, line, std::string("non-numeric entry in '") + field + "'");
    const double x = v.get<double>();
    if (!std::isfinite(x)) ParseFail(source, line, std::string("non-finite entry in '") + field + "'");
    out.push_back(x);
  }
  return out;
}

LogitRecord ParseRecordLine(const std::string& text, const std::string& source,
                            std::size_t line) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    ParseFail(source, line, std::string("invalid JSON: ") + e.what());
  }
  if (!obj.is_object()) ParseFail(source, line, "expected a JSON object");

  LogitRecord rec;
  const auto id = obj.find("id");
  if (id == obj.end()) ParseFail(source, line, "missing field 'id'");
  if (!id->is_string()) ParseFail(source, line, "field 'id' is not a string");
  rec.id = id->get<std::string>();

  const auto k = obj.find("k");
  if (k == obj.end()) ParseFail(source, line, "missing field 'k'");
  if (!k->is_number_integer() || k->get<long long>() < 1) {
    ParseFail(source, line, "field 'k' must be a positive integer");
  }
  const auto num_classes = static_cast<std::size_t>(k->get<long long>());

  rec.plm_logits = ReadLogitArray(obj, "plm_logits", num_classes, source, line);
  rec.polm_logits = ReadLogitArray(obj, "polm_logits", num_classes, source, line);

  if (const auto label = obj.find("label"); label != obj.end() && !label->is_null()) {
    if (!label->is_number_integer()) ParseFail(source, line, "field 'label' must be an integer");
    const long long y = label->get<long long>();
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      ParseFail(source, line, "field 'label' outside [0, k)");
    }
    rec.label = static_cast<int>(y);
  }
  if (const auto split = obj.find("split"); split != obj.end() && !split->is_null()) {
    if (!split->is_string()) ParseFail(source, line, "field 'split' must be a string");
    rec.split = ParseSplit(split->get<std::string>());
    if (!rec.split) ParseFail(source, line, "field 'split' must be 'validation' or 'test'");
  }
  return rec;
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out << content;
  if (!out) Fail(ErrorCode::kIo, "write failed for '" + path.string() + "'");
}

std::string FormatDouble(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string FormatOptional(const std::optional<double>& x) {
  return x ? FormatDouble(*x) : std::string();
}

ordered_json ParamsJson(const ScalingParams& params) {
  ordered_json j;
  j["kind"] = std::string(ToString(params.kind()));
  j["k"] = params.num_classes();
  j["values"] = params.values();
  return j;
}

ordered_json OptionalJson(const std::optional<double>& x) {
  return x ? ordered_json(*x) : ordered_json(nullptr);
}

ordered_json CountsJson(const DatasetCounts& c) {
  return {{"total", c.total}, {"agreement", c.agreement}, {"disagreement", c.disagreement}};
}

ordered_json OptimizerConfigJson(const OptimizerConfig& cfg) {
  return {{"learning_rate", cfg.learning_rate}, {"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},       {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},       {"adam_eps", cfg.adam_eps},
          {"seed", cfg.seed}};
}

ordered_json MetricsJson(const MetricSummary& m) {
  return {{"ece", m.ece},     {"mce", m.mce}, {"aece", m.aece},
          {"brier", m.brier}, {"nll", m.nll}, {"accuracy", m.accuracy}};
}

ordered_json ReliabilityJson(const ReliabilityTable& table) {
  ordered_json rows = ordered_json::array();
  for (const auto& row : table) {
    rows.push_back({{"bin", row.bin},
                    {"count", row.count},
                    {"confidence", OptionalJson(row.confidence)},
                    {"accuracy", OptionalJson(row.accuracy)}});
  }
  return rows;
}

ordered_json SelectiveJson(const std::vector<SelectivePoint>& points) {
  ordered_json rows = ordered_json::array();
  for (const auto& p : points) {
    rows.push_back({{"threshold", p.threshold},
                    {"coverage", p.coverage},
                    {"accuracy", OptionalJson(p.accuracy)}});
  }
  return rows;
}

ordered_json PropositionJson(const PropositionReport& r) {
  return {{"name", r.name},
          {"measured", r.measured},
          {"predicted", r.predicted},
          {"gap", r.gap},
          {"tolerance", r.tolerance},
          {"passed", r.passed},
          {"sample_count", r.sample_count},
          {"standard_error", r.standard_error},
          {"binned_ece", OptionalJson(r.binned_ece)}};
}

std::string ReliabilityCsv(const CalibrationReport& report) {
  std::string out = "stage,bin,count,confidence,accuracy\n";
  for (const auto* stage : {&report.pre, &report.post}) {
    const char* name = stage == &report.pre ? "pre" : "post";
    for (const auto& row : stage->reliability) {
      out += std::string(name) + "," + std::to_string(row.bin) + "," +
             std::to_string(row.count) + "," + FormatOptional(row.confidence) + "," +
             FormatOptional(row.accuracy) + "\n";
    }
  }
  return out;
}

std::string SelectiveCsv(const CalibrationReport& report) {
  std::string out = "stage,threshold,coverage,accuracy\n";
  for (const auto* stage : {&report.pre, &report.post}) {
    const char* name = stage == &report.pre ? "pre" : "post";
    for (const auto& p : stage->selective) {
      out += std::string(name) + "," + FormatDouble(p.threshold) + "," +
             FormatDouble(p.coverage) + "," + FormatOptional(p.accuracy) + "\n";
    }
  }
  return out;
}

std::string TraceCsv(const OptimizationTrace& trace) {
  const ScalingParams& p = trace.final_params;
  std::string out = "epoch,loss";
  switch (p.kind()) {
    case ScalingKind::kScalar:
      out += ",tau";
      break;
    case ScalingKind::kVector:
      for (std::size_t i = 0; i < p.num_classes(); ++i) out += ",v" + std::to_string(i);
      break;
    case ScalingKind::kMatrix:
      for (std::size_t i = 0; i < p.num_classes(); ++i) {
        for (std::size_t j = 0; j < p.num_classes(); ++j) {
          out += ",w" + std::to_string(i) + "_" + std::to_string(j);
        }
      }
      break;
  }
  out += "\n";
  for (const auto& e : trace.entries) {
    out += std::to_string(e.epoch) + "," + FormatDouble(e.loss);
    for (double v : e.params.values()) out += "," + FormatDouble(v);
    out += "\n";
  }
  return out;
}

void CheckBins(int num_bins) {
  if (num_bins < 1) Fail(ErrorCode::kConfig, "bins must be >= 1");
}

// Typed accessors for the simulate config.
template <typename T>
T Field(const nlohmann::json& obj, const std::string& name, T fallback,
        bool required = false) {
  const auto it = obj.find(name);
  if (it == obj.end()) {
    if (required) Fail(ErrorCode::kConfig, "missing field '" + name + "'");
    return fallback;
  }
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) Fail(ErrorCode::kConfig, "field '" + name + "' must be a boolean");
    return it->get<bool>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer() || it->get<long long>() < 0) {
      Fail(ErrorCode::kConfig, "field '" + name + "' must be a non-negative integer");
    }
    return static_cast<T>(it->get<long long>());
  } else {
    if (!it->is_number()) Fail(ErrorCode::kConfig, "field '" + name + "' must be a number");
    return it->get<double>();
  }
}

void RejectUnknown(const nlohmann::json& obj, std::initializer_list<const char*> known,
                   const std::string& scope) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) Fail(ErrorCode::kConfig, "unknown field '" + scope + key + "'");
  }
}

}  // namespace

const char* ToolkitVersion() { return DACA_VERSION; }

// ---------------------------------------------------------------------------
// JSONL

Dataset ParseLogitsJsonl(std::istream& in, const std::string& source) {
  std::vector<LogitRecord> records;
  std::unordered_set<std::string> ids;
  std::string text;
  std::size_t line = 0;
  std::optional<std::size_t> k;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    LogitRecord rec = ParseRecordLine(text, source, line);
    if (k && rec.num_classes() != *k) {
      ParseFail(source, line, "k=" + std::to_string(rec.num_classes()) +
                                  " differs from k=" + std::to_string(*k) +
                                  " on earlier lines");
    }
    k = rec.num_classes();
    if (!ids.insert(rec.id).second) ParseFail(source, line, "duplicate id '" + rec.id + "'");
    records.push_back(std::move(rec));
  }
  if (records.empty()) Fail(ErrorCode::kParse, source + ": empty dataset (no records)");
  return Dataset(*k, std::move(records));
}

Dataset ReadLogitsJsonl(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  return ParseLogitsJsonl(in, path.string());
}

std::string FormatLogitsJsonl(const Dataset& ds) {
  std::string out;
  for (const auto& rec : ds.records()) {
    ordered_json j;
    j["id"] = rec.id;
    j["k"] = rec.num_classes();
    j["plm_logits"] = rec.plm_logits;
    j["polm_logits"] = rec.polm_logits;
    if (rec.label) j["label"] = *rec.label;
    if (rec.split) j["split"] = std::string(ToString(*rec.split));
    out += j.dump();
    out += '\n';
  }
  return out;
}

void WriteLogitsJsonl(const fs::path& path, const Dataset& ds) {
  WriteFile(path, FormatLogitsJsonl(ds));
}

// ---------------------------------------------------------------------------
// Parameters

std::string FormatParamsJson(const ScalingParams& params) {
  return ParamsJson(params).dump(2) + "\n";
}

ScalingParams ParseParamsJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kParse, std::string("params: invalid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string() ||
      !j.contains("values") || !j["values"].is_array()) {
    Fail(ErrorCode::kParse, "params: expected {\"kind\": ..., \"values\": [...]}");
  }
  const auto kind = ParseScalingKind(j["kind"].get<std::string>());
  if (!kind) Fail(ErrorCode::kParse, "params: unknown kind");
  std::vector<double> values;
  for (const auto& v : j["values"]) {
    if (!v.is_number()) Fail(ErrorCode::kParse, "params: non-numeric value");
    values.push_back(v.get<double>());
  }
  try {
    switch (*kind) {
      case ScalingKind::kScalar:
        if (values.size() != 1) Fail(ErrorCode::kParse, "params: scalar needs one value");
        return ScalingParams::Scalar(values[0]);
      case ScalingKind::kVector:
        return ScalingParams::Vector(std::move(values));
      case ScalingKind::kMatrix: {
        const auto k = static_cast<std::size_t>(std::llround(std::sqrt(values.size())));
        return ScalingParams::Matrix(k, std::move(values));
      }
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    Fail(ErrorCode::kParse, std::string("params: ") + e.what());
  }
  Fail(ErrorCode::kParse, "params: unknown kind");
}

ScalingParams ReadParamsJson(const fs::path& path) {
  return ParseParamsJson(ReadFile(path));
}

// ---------------------------------------------------------------------------
// Reports

DatasetCounts CountAgreement(const Dataset& ds) {
  const std::size_t agree = ds.CountAgreement();
  return {ds.size(), agree, ds.size() - agree};
}

EvaluationBlock Evaluate(const Dataset& test, const ScalingParams& params,
                         int num_bins, const std::vector<double>& thresholds) {
  const auto samples = MakeEvalSamples(test, params);
  const auto width = Partition(samples, BinScheme::kEqualWidth, num_bins);
  return {Summarize(test, params, num_bins), MakeReliabilityTable(samples, width),
          SelectiveAccuracy(samples, thresholds)};
}

std::string FormatReportJson(const CalibrationReport& report) {
  const RunConfig& cfg = report.config;
  const bool calibrate = report.command == "calibrate";

  ordered_json config;
  config["val"] = calibrate ? ordered_json(cfg.val_path.string()) : ordered_json(nullptr);
  config["test"] = cfg.test_path.string();
  config["params"] = calibrate ? ordered_json(nullptr) : ordered_json(cfg.params_path.string());
  config["objective"] =
      calibrate ? ordered_json(std::string(ToString(cfg.objective))) : ordered_json(nullptr);
  config["shape"] = std::string(ToString(report.params.kind()));
  config["bins"] = cfg.num_bins;
  config["thresholds"] = cfg.thresholds;
  config["optimizer"] = calibrate ? OptimizerConfigJson(cfg.optimizer) : ordered_json(nullptr);

  ordered_json j;
  j["toolkit_version"] = ToolkitVersion();
  j["command"] = report.command;
  j["config"] = std::move(config);
  j["params"] = ParamsJson(report.params);
  if (report.optimizer) {
    const auto& o = *report.optimizer;
    j["optimizer"] = {{"epochs_run", o.epochs_run},
                      {"final_loss", o.final_loss},
                      {"examples_used", o.examples_used},
                      {"examples_filtered", o.examples_filtered},
                      {"diverged", o.diverged}};
  } else {
    j["optimizer"] = nullptr;
  }
  j["counts"] = {{"validation", report.validation_counts
                                    ? CountsJson(*report.validation_counts)
                                    : ordered_json(nullptr)},
                 {"test", CountsJson(report.test_counts)}};
  j["metrics"] = {{"pre", MetricsJson(report.pre.metrics)},
                  {"post", MetricsJson(report.post.metrics)}};
  j["reliability"] = {{"pre", ReliabilityJson(report.pre.reliability)},
                      {"post", ReliabilityJson(report.post.reliability)}};
  j["selective"] = {{"pre", SelectiveJson(report.pre.selective)},
                    {"post", SelectiveJson(report.post.selective)}};
  return j.dump(2) + "\n";
}

CalibrationReport RunCalibrate(const RunConfig& cfg) {
  CheckBins(cfg.num_bins);
  cfg.optimizer.Validate();
  const Dataset val = ReadLogitsJsonl(cfg.val_path);
  const Dataset test = ReadLogitsJsonl(cfg.test_path);
  if (val.num_classes() != test.num_classes()) {
    Fail(ErrorCode::kInput, "validation and test files disagree on k");
  }
  if (!test.AllLabeled()) {
    Fail(ErrorCode::kMissingLabel, "test file '" + cfg.test_path.string() +
                                       "' has unlabeled records; metrics need labels");
  }

  const DatasetCounts val_counts = CountAgreement(val);
  if (cfg.objective == Objective::kDaca && val_counts.agreement == 0) {
    Fail(ErrorCode::kAllDisagree,
         "all " + std::to_string(val_counts.total) +
             " validation records disagree (agreement=0, disagreement=" +
             std::to_string(val_counts.disagreement) + "); cannot calibrate with daca");
  }

  const OptimizationTrace trace = Optimize(val, cfg.objective, cfg.shape, cfg.optimizer);

  CalibrationReport report;
  report.command = "calibrate";
  report.config = cfg;
  report.params = trace.final_params;
  report.optimizer = OptimizerSummary{static_cast<int>(trace.entries.size()),
                                      trace.final_loss, trace.num_used,
                                      trace.num_filtered, trace.diverged};
  report.validation_counts = val_counts;
  report.test_counts = CountAgreement(test);
  report.pre = Evaluate(test, ScalingParams::Identity(cfg.shape, test.num_classes()),
                        cfg.num_bins, cfg.thresholds);
  report.post = Evaluate(test, trace.final_params, cfg.num_bins, cfg.thresholds);

  WriteFile(cfg.out_dir / "report.json", FormatReportJson(report));
  WriteFile(cfg.out_dir / "params.json", FormatParamsJson(trace.final_params));
  WriteFile(cfg.out_dir / "reliability.csv", ReliabilityCsv(report));
  WriteFile(cfg.out_dir / "selective.csv", SelectiveCsv(report));
  WriteFile(cfg.out_dir / "trace.csv", TraceCsv(trace));
  return report;
}

CalibrationReport RunEvaluate(const RunConfig& cfg) {
  CheckBins(cfg.num_bins);
  const Dataset test = ReadLogitsJsonl(cfg.test_path);
  const ScalingParams params = ReadParamsJson(cfg.params_path);
  params.CheckCompatible(test.num_classes());
  if (!test.AllLabeled()) {
    Fail(ErrorCode::kMissingLabel, "test file '" + cfg.test_path.string() +
                                       "' has unlabeled records; metrics need labels");
  }

  CalibrationReport report;
  report.command = "evaluate";
  report.config = cfg;
  report.params = params;
  report.test_counts = CountAgreement(test);
  report.pre = Evaluate(test, ScalingParams::Identity(params.kind(), test.num_classes()),
                        cfg.num_bins, cfg.thresholds);
  report.post = Evaluate(test, params, cfg.num_bins, cfg.thresholds);

  WriteFile(cfg.out_dir / "report.json", FormatReportJson(report));
  WriteFile(cfg.out_dir / "reliability.csv", ReliabilityCsv(report));
  WriteFile(cfg.out_dir / "selective.csv", SelectiveCsv(report));
  return report;
}

// ---------------------------------------------------------------------------
// Simulation

SimulateConfig ParseSimulateConfig(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    Fail(ErrorCode::kConfig, std::string("simulate config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) Fail(ErrorCode::kConfig, "simulate config must be a JSON object");
  RejectUnknown(j,
                {"pi", "n", "k", "seed", "acc_f_agree", "acc_g_agree", "acc_f_dis",
                 "acc_g_dis", "conf_sharpness", "optimizer", "grid"},
                "");

  SimulateConfig cfg;
  MixtureConfig& m = cfg.mixture;
  m.pi = Field<double>(j, "pi", m.pi, true);
  m.n = Field<std::size_t>(j, "n", m.n, true);
  m.k = Field<std::size_t>(j, "k", m.k, true);
  m.seed = Field<std::uint64_t>(j, "seed", m.seed);
  m.acc_f_agree = Field<double>(j, "acc_f_agree", m.acc_f_agree);
  m.acc_g_agree = Field<double>(j, "acc_g_agree", m.acc_f_agree);
  m.acc_f_dis = Field<double>(j, "acc_f_dis", m.acc_f_dis);
  m.acc_g_dis = Field<double>(j, "acc_g_dis", m.acc_g_dis);
  m.conf_sharpness = Field<double>(j, "conf_sharpness", m.conf_sharpness);
  m.Validate();

  if (const auto it = j.find("optimizer"); it != j.end()) {
    if (!it->is_object()) Fail(ErrorCode::kConfig, "field 'optimizer' must be an object");
    RejectUnknown(*it,
                  {"learning_rate", "epochs", "batch_size", "adam_beta1", "adam_beta2",
                   "adam_eps", "seed"},
                  "optimizer.");
    OptimizerConfig& o = cfg.optimizer;
    o.learning_rate = Field<double>(*it, "learning_rate", o.learning_rate);
    o.epochs = Field<int>(*it, "epochs", o.epochs);
    o.batch_size = Field<int>(*it, "batch_size", o.batch_size);
    o.adam_beta1 = Field<double>(*it, "adam_beta1", o.adam_beta1);
    o.adam_beta2 = Field<double>(*it, "adam_beta2", o.adam_beta2);
    o.adam_eps = Field<double>(*it, "adam_eps", o.adam_eps);
    o.seed = Field<std::uint64_t>(*it, "seed", o.seed);
  }
  try {
    cfg.optimizer.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, std::string("field 'optimizer': ") + e.what());
  }

  if (const auto it = j.find("grid"); it != j.end()) {
    if (!it->is_object()) Fail(ErrorCode::kConfig, "field 'grid' must be an object");
    RejectUnknown(*it, {"tau_min", "tau_max", "num_points", "log_spaced"}, "grid.");
    TemperatureGrid& g = cfg.grid;
    g.tau_min = Field<double>(*it, "tau_min", g.tau_min);
    g.tau_max = Field<double>(*it, "tau_max", g.tau_max);
    g.num_points = Field<int>(*it, "num_points", g.num_points);
    g.log_spaced = Field<bool>(*it, "log_spaced", g.log_spaced);
  }
  try {
    (void)cfg.grid.Points();
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, std::string("field 'grid': ") + e.what());
  }
  return cfg;
}

SimulateConfig ReadSimulateConfig(const fs::path& path) {
  return ParseSimulateConfig(ReadFile(path));
}

SimulationResult RunSimulate(const SimulateConfig& cfg, const fs::path& out_dir) {
  MixtureConfig test_cfg = cfg.mixture;
  test_cfg.seed = cfg.mixture.seed + 0x9E3779B97F4A7C15ULL;
  const Dataset val = GenerateMixture(cfg.mixture, Split::kValidation, "val-");
  const Dataset test = GenerateMixture(test_cfg, Split::kTest, "test-");
  WriteLogitsJsonl(out_dir / "validation.jsonl", val);
  WriteLogitsJsonl(out_dir / "test.jsonl", test);

  SimulationResult result;
  result.propositions.push_back(VerifyPerfectAlignmentEce(cfg.mixture));

  const Dataset agree = val.AgreementSubset();
  const Dataset disagree = val.DisagreementSubset();
  if (!disagree.empty()) {
    result.propositions.push_back(VerifyDivergentTemperature(disagree, cfg.grid));
  }
  if (!agree.empty() && !disagree.empty()) {
    PropositionReport r;
    r.name = "conservative_temperature";
    r.measured = GridSearchTemperature(val, Objective::kNaive, cfg.grid).tau;
    r.predicted = GridSearchTemperature(agree, Objective::kNaive, cfg.grid).tau;
    r.gap = std::abs(r.measured - r.predicted);
    r.passed = r.measured >= r.predicted;
    r.sample_count = val.size();
    result.propositions.push_back(r);
  }

  result.traces = TemperatureTrace(
      val, {Subset::kAgreement, Subset::kDisagreement, Subset::kAll}, cfg.optimizer);

  ordered_json traces = ordered_json::array();
  std::string csv = "subset,epoch,tau,loss\n";
  for (const auto& st : result.traces) {
    ordered_json t;
    t["subset"] = std::string(ToString(st.subset));
    if (st.trace) {
      t["epochs_run"] = st.trace->entries.size();
      t["final_tau"] = st.trace->final_params.temperature();
      t["final_loss"] = st.trace->final_loss;
      t["diverged"] = st.trace->diverged;
      t["warning"] = nullptr;
      for (const auto& e : st.trace->entries) {
        csv += std::string(ToString(st.subset)) + "," + std::to_string(e.epoch) + "," +
               FormatDouble(e.params.temperature()) + "," + FormatDouble(e.loss) + "\n";
      }
    } else {
      t["epochs_run"] = 0;
      t["final_tau"] = nullptr;
      t["final_loss"] = nullptr;
      t["diverged"] = false;
      t["warning"] = st.warning;
    }
    traces.push_back(std::move(t));
  }

  const MixtureConfig& m = cfg.mixture;
  ordered_json doc;
  doc["toolkit_version"] = ToolkitVersion();
  doc["mixture"] = {{"pi", m.pi},
                    {"n", m.n},
                    {"k", m.k},
                    {"seed", m.seed},
                    {"acc_f_agree", m.acc_f_agree},
                    {"acc_g_agree", m.acc_g_agree},
                    {"acc_f_dis", m.acc_f_dis},
                    {"acc_g_dis", m.acc_g_dis},
                    {"conf_sharpness", m.conf_sharpness}};
  doc["counts"] = {{"validation", CountsJson(CountAgreement(val))},
                   {"test", CountsJson(CountAgreement(test))}};
  ordered_json props = ordered_json::array();
  for (const auto& r : result.propositions) props.push_back(PropositionJson(r));
  doc["propositions"] = std::move(props);
  doc["traces"] = std::move(traces);

  WriteFile(out_dir / "propositions.json", doc.dump(2) + "\n");
  WriteFile(out_dir / "trace.csv", csv);
  return result;
}

// ---------------------------------------------------------------------------
// Oracle check

OracleCheckResult RunOracleCheck(const Dataset& ds, Objective objective,
                                 const OptimizerConfig& cfg,
                                 const TemperatureGrid& grid) {
  OracleCheckResult r;
  r.grid = GridSearchTemperature(ds, objective, grid);
  const OptimizationTrace trace = Optimize(ds, objective, ScalingKind::kScalar, cfg);
  r.adam_tau = trace.final_params.temperature();
  r.adam_loss = trace.final_loss;
  r.diverged = trace.diverged;
  r.relative_tau_gap = std::abs(r.adam_tau - r.grid.tau) / r.grid.tau;
  r.loss_gap = r.adam_loss - r.grid.loss;
  r.passed = !r.diverged && r.relative_tau_gap <= 0.02 && std::abs(r.loss_gap) <= 1e-4;
  return r;
}

std::string FormatOracleCheckJson(const OracleCheckResult& r) {
  ordered_json j;
  j["grid_tau"] = r.grid.tau;
  j["grid_loss"] = r.grid.loss;
  j["adam_tau"] = r.adam_tau;
  j["adam_loss"] = r.adam_loss;
  j["relative_tau_gap"] = r.relative_tau_gap;
  j["loss_gap"] = r.loss_gap;
  j["diverged"] = r.diverged;
  j["passed"] = r.passed;
  return j.dump(2) + "\n";
}

}  // namespace daca
