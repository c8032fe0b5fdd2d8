#include "oodshape/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "oodshape/error.hpp"
#include "oodshape/rng.hpp"
#include "oodshape/stats.hpp"

namespace oodshape::bench {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------- config

void reject_unknown(const json &j, const std::set<std::string> &allowed, const std::string &where) {
  if (!j.is_object())
    throw ConfigError(where + " must be a JSON object");
  for (const auto &[key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T> T get_as(const json &j, const std::string &key, const std::string &where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
std::optional<T> get_optional(const json &j, const std::string &key, const std::string &where) {
  if (!j.contains(key) || j.at(key).is_null())
    return std::nullopt;
  return get_as<T>(j, key, where);
}

fs::path resolve(const fs::path &base, const std::string &p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

DatasetEntry parse_dataset(const json &j, const fs::path &base, const std::string &where) {
  reject_unknown(j, {"name", "path"}, where);
  return {get_as<std::string>(j, "name", where),
          resolve(base, get_as<std::string>(j, "path", where))};
}

MethodSpec parse_method(const json &j, std::size_t index) {
  const std::string where = "methods[" + std::to_string(index) + "]";
  MethodSpec m;
  if (j.is_string()) {
    m.name = j.get<std::string>();
  } else {
    if (!j.is_object())
      throw ConfigError(where + " must be a string or an object");
    m.name = get_as<std::string>(j, "name", where);
  }
  const json obj = j.is_object() ? j : json::object({{"name", m.name}});

  static const std::map<std::string, std::set<std::string>> allowed = {
      {"identity", {}},
      {"ours-v", {"fit"}},
      {"ours-e", {"fit"}},
      {"react", {"t", "t_pct"}},
      {"bfact", {"t", "t_pct", "n"}},
      {"vra-p", {"low", "high", "low_pct", "high_pct"}},
      {"ash-p", {"p"}},
      {"ash-b", {"p"}},
      {"ash-s", {"p"}},
      {"dice", {"p"}},
  };
  auto it = allowed.find(m.name);
  if (it == allowed.end())
    throw ConfigError(where + ": unknown method '" + m.name + "'");
  auto keys = it->second;
  keys.insert("name");
  keys.insert("label");
  reject_unknown(obj, keys, where);

  m.label = get_optional<std::string>(obj, "label", where).value_or("");
  if (m.is_ours()) {
    const auto fit = get_optional<std::string>(obj, "fit", where).value_or("id");
    if (fit == "id")
      m.fit = ThetaFit::IdOnly;
    else if (fit == "ood")
      m.fit = ThetaFit::WithOod;
    else if (fit == "alternating")
      m.fit = ThetaFit::Alternating;
    else
      throw ConfigError(where + ".fit must be one of id, ood, alternating");
    if (m.label.empty())
      m.label = m.name + (m.fit == ThetaFit::WithOod       ? "+ood"
                          : m.fit == ThetaFit::Alternating ? "+dynamic"
                                                           : "");
  }
  if (m.label.empty())
    m.label = m.name;

  if (m.name == "react" || m.name == "bfact") {
    m.t = get_optional<double>(obj, "t", where);
    m.t_pct = get_optional<double>(obj, "t_pct", where);
    if (m.t && m.t_pct)
      throw ConfigError(where + ": give t or t_pct, not both");
    if (!m.t && !m.t_pct)
      m.t_pct = m.name == "react" ? 90.0 : 95.0;
    if (m.name == "bfact")
      m.n = get_optional<int>(obj, "n", where).value_or(2);
  } else if (m.name == "vra-p") {
    m.low = get_optional<double>(obj, "low", where);
    m.high = get_optional<double>(obj, "high", where);
    m.low_pct = get_optional<double>(obj, "low_pct", where);
    m.high_pct = get_optional<double>(obj, "high_pct", where);
    if ((m.low && m.low_pct) || (m.high && m.high_pct))
      throw ConfigError(where + ": give each VRA-P limit as a value or a percentile, not both");
    if (!m.low && !m.low_pct)
      m.low = 0.5;
    if (!m.high && !m.high_pct)
      m.high = 1.0;
  } else if (m.name == "ash-p" || m.name == "ash-b" || m.name == "ash-s" || m.name == "dice") {
    const double fallback = m.name == "ash-p"   ? 60.0
                            : m.name == "ash-b" ? 65.0
                            : m.name == "ash-s" ? 90.0
                                                : 70.0;
    m.p = get_optional<double>(obj, "p", where).value_or(fallback);
    if (!(m.p > 0.0 && m.p < 100.0))
      throw ConfigError(where + ".p must lie in (0, 100)");
  }
  return m;
}

ScoreSpec parse_score(const json &j, std::size_t index) {
  const std::string where = "scores[" + std::to_string(index) + "]";
  std::string name;
  std::optional<double> temperature;
  std::optional<std::string> label;
  if (j.is_string()) {
    name = j.get<std::string>();
  } else {
    reject_unknown(j, {"name", "temperature", "label"}, where);
    name = get_as<std::string>(j, "name", where);
    temperature = get_optional<double>(j, "temperature", where);
    label = get_optional<std::string>(j, "label", where);
  }
  if (temperature && !(*temperature > 0.0))
    throw ConfigError(where + ".temperature must be positive");

  ScoreSpec s;
  if (name == "msp") {
    s.kind = Msp{temperature.value_or(1.0)};
  } else if (name == "mls") {
    if (temperature)
      throw ConfigError(where + ": mls takes no temperature");
    s.kind = Mls{};
  } else if (name == "energy") {
    s.kind = Energy{temperature.value_or(1.0)};
  } else if (name == "odin-noperturb") {
    s.kind = Msp{temperature.value_or(1000.0)};
  } else {
    throw ConfigError(where + ": unknown score '" + name + "'");
  }
  s.label = label.value_or(name == "odin-noperturb" ? name : score_name(s.kind));
  return s;
}

std::optional<std::size_t> parse_count(const json &j, const std::string &key,
                                       std::optional<std::size_t> fallback) {
  if (!j.contains(key))
    return fallback;
  if (j.at(key).is_null())
    return std::nullopt;
  const auto v = get_as<long long>(j, key, "config");
  if (v < 1)
    throw ConfigError("config." + key + " must be >= 1 or null");
  return static_cast<std::size_t>(v);
}

// ---------------------------------------------------------------- formatting

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string general(double v) {
  if (std::isnan(v))
    return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------- evaluation

struct Resolved {
  std::string label;
  std::string kind;
  ShapingMethod method;
  std::vector<ScoreSpec> scores;
  std::optional<ThetaSolution> theta;
};

// Shared, data-dependent quantities computed at most once per call.
class Context {
public:
  Context(const BenchmarkConfig &config, const BenchmarkData &data)
      : config_(config), data_(data) {}

  double train_percentile(double pct) {
    auto it = percentiles_.find(pct);
    if (it != percentiles_.end())
      return it->second;
    const double v = percentile(data_.id_train.features().data(), pct);
    percentiles_.emplace(pct, v);
    return v;
  }

  const std::vector<double> &train_feature_means() {
    if (!feature_means_)
      feature_means_ = feature_means(data_.id_train);
    return *feature_means_;
  }

  // Rows of id_train used to estimate E[I(z)].
  const FeatureMatrix &fit_rows() {
    if (!config_.subsample)
      return data_.id_train;
    if (!fit_subset_) {
      Xoshiro256StarStar rng(config_.seed);
      const auto rows =
          sample_without_replacement(data_.id_train.n_samples(), *config_.subsample, rng);
      fit_subset_ = data_.id_train.select_rows(rows);
    }
    return *fit_subset_;
  }

  ThetaSolution theta(ThetaFit fit, const IntervalPartition &p) {
    for (const auto &[key, sol] : thetas_)
      if (key.first == fit && key.second == p)
        return sol;
    ThetaSolution sol = solve(fit, p);
    thetas_.emplace_back(std::make_pair(fit, p), sol);
    return sol;
  }

private:
  ThetaSolution solve(ThetaFit fit, const IntervalPartition &p) {
    switch (fit) {
    case ThetaFit::IdOnly:
      return solve_id_only(mean_isfi(fit_rows(), data_.classifier, p));
    case ThetaFit::WithOod:
      if (!data_.fit_ood)
        throw ConfigError("fit \"ood\" needs a fit_ood dataset entry");
      return solve_with_ood(mean_isfi(fit_rows(), data_.classifier, p),
                            mean_isfi(*data_.fit_ood, data_.classifier, p));
    case ThetaFit::Alternating:
      return solve_alternating(data_.id_train, data_.classifier, p,
                               {config_.alternating_iters, config_.alternating_subsample,
                                config_.seed, config_.out_of_range});
    }
    throw ConfigError("unknown theta fit");
  }

  const BenchmarkConfig &config_;
  const BenchmarkData &data_;
  std::map<double, double> percentiles_;
  std::optional<std::vector<double>> feature_means_;
  std::optional<FeatureMatrix> fit_subset_;
  std::vector<std::pair<std::pair<ThetaFit, IntervalPartition>, ThetaSolution>> thetas_;
};

ScoreSpec ours_score(const MethodSpec &spec) {
  if (spec.name == "ours-v")
    return {"mls", Mls{}};
  return {"energy", Energy{1.0}};
}

// `identity_for_ours` swaps ours methods for identity shaping (the K = 0 sweep row).
Resolved resolve(const MethodSpec &spec, const BenchmarkConfig &config, const BenchmarkData &data,
                 const IntervalPartition &partition, Context &ctx, bool identity_for_ours = false) {
  Resolved r;
  r.label = spec.label;
  r.kind = spec.name;
  r.scores = config.scores;
  if (spec.name == "identity") {
    r.method = Identity{};
  } else if (spec.is_ours()) {
    r.scores = {ours_score(spec)};
    if (identity_for_ours) {
      r.method = Identity{};
    } else {
      r.theta = ctx.theta(spec.fit, partition);
      r.method = r.theta->as_method(config.out_of_range);
    }
  } else if (spec.name == "react") {
    r.method = ReAct{spec.t ? *spec.t : ctx.train_percentile(*spec.t_pct)};
  } else if (spec.name == "bfact") {
    r.method = BFAct{spec.t ? *spec.t : ctx.train_percentile(*spec.t_pct), spec.n};
  } else if (spec.name == "vra-p") {
    r.method = VraP{spec.low ? *spec.low : ctx.train_percentile(*spec.low_pct),
                    spec.high ? *spec.high : ctx.train_percentile(*spec.high_pct)};
  } else if (spec.name == "ash-p") {
    r.method = AshP{spec.p};
  } else if (spec.name == "ash-b") {
    r.method = AshB{spec.p};
  } else if (spec.name == "ash-s") {
    r.method = AshS{spec.p};
  } else if (spec.name == "dice") {
    r.method = dice_mask(data.classifier, ctx.train_feature_means(), spec.p).method;
  } else {
    throw ConfigError("unknown method '" + spec.name + "'");
  }
  try {
    validate(r.method);
  } catch (const InvalidArgument &e) {
    throw ConfigError("method '" + spec.label + "': " + e.what());
  }
  return r;
}

struct Evaluation {
  std::vector<EvalResult> rows;
  std::vector<EvalResult> averages;
};

Evaluation evaluate_methods(const std::vector<Resolved> &methods, const BenchmarkData &data,
                            const BenchmarkConfig &config) {
  const std::size_t n_ood = data.ood.size();
  // results[method][score][ood]
  std::vector<std::vector<std::vector<EvalResult>>> results(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const auto &m = methods[mi];
    std::vector<ScoreKind> kinds;
    for (const auto &s : m.scores)
      kinds.push_back(s.kind);
    const auto id_scored = score_dataset(data.id_test, data.classifier, m.method, kinds);
    results[mi].assign(m.scores.size(), std::vector<EvalResult>(n_ood));
    if (config.write_scores)
      for (std::size_t si = 0; si < kinds.size(); ++si) {
        std::string text;
        for (double v : id_scored[si].scores)
          text += full(v) + "\n";
        write_text(config.output_dir / "scores" /
                       (data.id_test.source_tag() + "." + m.label + "." + m.scores[si].label +
                        ".csv"),
                   text);
      }
    for (std::size_t oi = 0; oi < n_ood; ++oi) {
      const auto ood_scored = score_dataset(data.ood[oi], data.classifier, m.method, kinds);
      for (std::size_t si = 0; si < kinds.size(); ++si) {
        auto r = evaluate(id_scored[si].scores, ood_scored[si].scores);
        r.dataset = data.ood[oi].source_tag();
        r.method = m.label;
        r.score = m.scores[si].label;
        results[mi][si][oi] = r;
        if (config.write_scores) {
          std::string text;
          for (double v : ood_scored[si].scores)
            text += full(v) + "\n";
          write_text(config.output_dir / "scores" /
                         (r.dataset + "." + r.method + "." + r.score + ".csv"),
                     text);
        }
      }
    }
  }

  Evaluation out;
  for (std::size_t oi = 0; oi < n_ood; ++oi)
    for (std::size_t mi = 0; mi < methods.size(); ++mi)
      for (std::size_t si = 0; si < methods[mi].scores.size(); ++si)
        out.rows.push_back(results[mi][si][oi]);
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    for (std::size_t si = 0; si < methods[mi].scores.size(); ++si) {
      EvalResult avg;
      avg.dataset = "AVERAGE";
      avg.method = methods[mi].label;
      avg.score = methods[mi].scores[si].label;
      for (const auto &r : results[mi][si]) {
        avg.auroc += r.auroc;
        avg.fpr_at_95tpr += r.fpr_at_95tpr;
        avg.n_ood += r.n_ood;
        avg.n_id = r.n_id;
      }
      avg.auroc /= static_cast<double>(n_ood);
      avg.fpr_at_95tpr /= static_cast<double>(n_ood);
      out.averages.push_back(avg);
    }
  return out;
}

std::vector<const MethodSpec *> ours_methods(const BenchmarkConfig &config) {
  std::vector<const MethodSpec *> out;
  for (const auto &m : config.methods)
    if (m.is_ours())
      out.push_back(&m);
  if (out.empty())
    throw ConfigError("sweeps need at least one ours-v or ours-e method in the config");
  return out;
}

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace

// ---------------------------------------------------------------- public

BenchmarkConfig parse_config(const json &j, const fs::path &base_dir) {
  reject_unknown(j,
                 {"classifier", "id_train", "id_test", "ood", "fit_ood", "methods", "scores", "k",
                  "lo_pct", "hi_pct", "out_of_range", "subsample", "seed", "alternating_iters",
                  "alternating_subsample", "diagnostics_subsample", "output_dir", "write_scores"},
                 "config");
  BenchmarkConfig c;
  c.echo = j;

  if (!j.contains("classifier"))
    throw ConfigError("config.classifier is required");
  const auto &cls = j.at("classifier");
  reject_unknown(cls, {"weights", "bias"}, "config.classifier");
  c.weights_path = resolve(base_dir, get_as<std::string>(cls, "weights", "config.classifier"));
  c.bias_path = resolve(base_dir, get_as<std::string>(cls, "bias", "config.classifier"));

  for (const char *key : {"id_train", "id_test", "ood", "methods", "scores"})
    if (!j.contains(key))
      throw ConfigError(std::string("config.") + key + " is required");
  c.id_train = parse_dataset(j.at("id_train"), base_dir, "config.id_train");
  c.id_test = parse_dataset(j.at("id_test"), base_dir, "config.id_test");
  if (!j.at("ood").is_array() || j.at("ood").empty())
    throw ConfigError("config.ood must be a nonempty array");
  std::set<std::string> ood_names;
  for (std::size_t i = 0; i < j.at("ood").size(); ++i) {
    c.ood.push_back(parse_dataset(j.at("ood")[i], base_dir, "config.ood[" + std::to_string(i) + "]"));
    if (!ood_names.insert(c.ood.back().name).second || c.ood.back().name == "AVERAGE")
      throw ConfigError("duplicate or reserved OOD dataset name '" + c.ood.back().name + "'");
  }
  if (j.contains("fit_ood") && !j.at("fit_ood").is_null())
    c.fit_ood = parse_dataset(j.at("fit_ood"), base_dir, "config.fit_ood");

  if (!j.at("methods").is_array() || j.at("methods").empty())
    throw ConfigError("config.methods must be a nonempty array");
  std::set<std::string> labels;
  for (std::size_t i = 0; i < j.at("methods").size(); ++i) {
    c.methods.push_back(parse_method(j.at("methods")[i], i));
    if (!labels.insert(c.methods.back().label).second)
      throw ConfigError("duplicate method label '" + c.methods.back().label + "'");
    if (c.methods.back().fit == ThetaFit::WithOod && !j.contains("fit_ood"))
      throw ConfigError("method '" + c.methods.back().label + "' needs config.fit_ood");
  }
  if (!j.at("scores").is_array() || j.at("scores").empty())
    throw ConfigError("config.scores must be a nonempty array");
  for (std::size_t i = 0; i < j.at("scores").size(); ++i)
    c.scores.push_back(parse_score(j.at("scores")[i], i));

  if (j.contains("k")) {
    const auto k = get_as<long long>(j, "k", "config");
    if (k < 1)
      throw ConfigError("config.k must be >= 1");
    c.k = static_cast<std::size_t>(k);
  }
  c.lo_pct = get_optional<double>(j, "lo_pct", "config").value_or(c.lo_pct);
  c.hi_pct = get_optional<double>(j, "hi_pct", "config").value_or(c.hi_pct);
  if (!(c.lo_pct >= 0.0 && c.lo_pct < c.hi_pct && c.hi_pct <= 100.0))
    throw ConfigError("config needs 0 <= lo_pct < hi_pct <= 100");
  const auto oor = get_optional<std::string>(j, "out_of_range", "config").value_or("zero");
  if (oor == "zero")
    c.out_of_range = OutOfRange::Zero;
  else if (oor == "keep")
    c.out_of_range = OutOfRange::Keep;
  else
    throw ConfigError("config.out_of_range must be \"zero\" or \"keep\"");
  c.subsample = parse_count(j, "subsample", std::nullopt);
  c.seed = get_optional<std::uint64_t>(j, "seed", "config").value_or(0);
  if (j.contains("alternating_iters")) {
    const auto it = get_as<long long>(j, "alternating_iters", "config");
    if (it < 1)
      throw ConfigError("config.alternating_iters must be >= 1");
    c.alternating_iters = static_cast<std::size_t>(it);
  }
  c.alternating_subsample = parse_count(j, "alternating_subsample", c.alternating_subsample);
  c.diagnostics_subsample = parse_count(j, "diagnostics_subsample", c.diagnostics_subsample);
  c.output_dir = resolve(base_dir, get_optional<std::string>(j, "output_dir", "config").value_or("out"));
  c.write_scores = get_optional<bool>(j, "write_scores", "config").value_or(false);
  return c;
}

BenchmarkConfig load_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

BenchmarkData load_data(const BenchmarkConfig &config) {
  BenchmarkData data{load_classifier(config.weights_path, config.bias_path),
                     load_dataset(config.id_train), load_dataset(config.id_test), {}, {}};
  for (const auto &entry : config.ood)
    data.ood.push_back(load_dataset(entry));
  if (config.fit_ood)
    data.fit_ood = load_dataset(*config.fit_ood);

  const std::size_t m = data.classifier.feature_dim();
  auto check = [m](const FeatureMatrix &f, const fs::path &path) {
    if (f.feature_dim() != m)
      throw LengthMismatch(path.string() + ": feature dim " + std::to_string(f.feature_dim()) +
                           " != classifier dim " + std::to_string(m));
  };
  check(data.id_train, config.id_train.features_path);
  check(data.id_test, config.id_test.features_path);
  for (std::size_t i = 0; i < data.ood.size(); ++i)
    check(data.ood[i], config.ood[i].features_path);
  if (data.fit_ood)
    check(*data.fit_ood, config.fit_ood->features_path);
  return data;
}

RunReport run(const BenchmarkConfig &config, const BenchmarkData &data) {
  const auto start = std::chrono::steady_clock::now();
  const auto partition = fit_partition(data.id_train, config.k, config.lo_pct, config.hi_pct);
  Context ctx(config, data);

  std::vector<Resolved> methods;
  for (const auto &spec : config.methods)
    methods.push_back(resolve(spec, config, data, partition, ctx));
  auto eval = evaluate_methods(methods, data, config);

  RunReport report{partition, std::move(eval.rows), std::move(eval.averages), {}, config.echo};
  for (const auto &m : methods)
    if (m.theta)
      report.thetas.emplace_back(m.label, *m.theta);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

std::string report_csv(const RunReport &report) {
  std::string out = "ood_dataset,method,score,auroc,fpr95,n_id,n_ood\n";
  auto line = [&out](const EvalResult &r) {
    out += csv_field(r.dataset) + "," + csv_field(r.method) + "," + csv_field(r.score) + "," +
           fixed6(r.auroc) + "," + fixed6(r.fpr_at_95tpr) + "," + std::to_string(r.n_id) + "," +
           std::to_string(r.n_ood) + "\n";
  };
  for (const auto &r : report.rows)
    line(r);
  for (const auto &r : report.averages)
    line(r);
  return out;
}

json report_json(const RunReport &report) {
  auto row = [](const EvalResult &r) {
    return json{{"ood_dataset", r.dataset}, {"method", r.method}, {"score", r.score},
                {"auroc", r.auroc},         {"fpr95", r.fpr_at_95tpr}, {"n_id", r.n_id},
                {"n_ood", r.n_ood}};
  };
  json j;
  j["partition"] = to_json(report.partition);
  j["rows"] = json::array();
  for (const auto &r : report.rows)
    j["rows"].push_back(row(r));
  j["average"] = json::array();
  for (const auto &r : report.averages)
    j["average"].push_back(row(r));
  j["thetas"] = json::object();
  for (const auto &[label, sol] : report.thetas)
    j["thetas"][label] = to_json(sol);
  j["config"] = report.config_echo;
  return j;
}

void write_text(const fs::path &path, const std::string &text) {
  std::error_code ec;
  if (path.has_parent_path())
    fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoFailure("cannot write " + path.string());
  out << text;
  if (!out)
    throw IoFailure("write failed for " + path.string());
}

void write_report(const RunReport &report, const fs::path &dir) {
  write_text(dir / "report.csv", report_csv(report));
  write_text(dir / "report.json", report_json(report).dump(2) + "\n");
}

std::vector<SweepRow> sweep_k(const BenchmarkConfig &config, const BenchmarkData &data,
                              const std::vector<std::size_t> &k_values) {
  if (k_values.empty())
    throw ConfigError("sweep-k needs at least one K");
  const auto specs = ours_methods(config);
  const auto limits = fit_partition(data.id_train, 1, config.lo_pct, config.hi_pct);
  Context ctx(config, data);

  std::vector<SweepRow> rows;
  for (auto k : k_values) {
    const bool identity = k == 0;
    const IntervalPartition partition(limits.alpha(), limits.beta(), identity ? 1 : k);
    std::vector<Resolved> methods;
    for (const auto *spec : specs)
      methods.push_back(resolve(*spec, config, data, partition, ctx, identity));
    const auto eval = evaluate_methods(methods, data, config);
    for (const auto &avg : eval.averages)
      rows.push_back({k, config.lo_pct, config.hi_pct, avg.method, avg.score, avg.auroc,
                      avg.fpr_at_95tpr});
  }
  return rows;
}

std::vector<SweepRow> sweep_percentiles(const BenchmarkConfig &config, const BenchmarkData &data,
                                        const std::vector<std::pair<double, double>> &pairs) {
  if (pairs.empty())
    throw ConfigError("sweep-pct needs at least one percentile pair");
  const auto specs = ours_methods(config);
  Context ctx(config, data);

  std::vector<SweepRow> rows;
  for (const auto &[lo, hi] : pairs) {
    if (!(lo >= 0.0 && lo < hi && hi <= 100.0))
      throw ConfigError("percentile pair needs 0 <= lo < hi <= 100");
    const auto partition = fit_partition(data.id_train, config.k, lo, hi);
    std::vector<Resolved> methods;
    for (const auto *spec : specs)
      methods.push_back(resolve(*spec, config, data, partition, ctx));
    const auto eval = evaluate_methods(methods, data, config);
    for (const auto &avg : eval.averages)
      rows.push_back({config.k, lo, hi, avg.method, avg.score, avg.auroc, avg.fpr_at_95tpr});
  }
  return rows;
}

std::string sweep_k_csv(const std::vector<SweepRow> &rows) {
  std::string out = "k,method,score,auroc,fpr95\n";
  for (const auto &r : rows)
    out += std::to_string(r.k) + "," + csv_field(r.method) + "," + csv_field(r.score) + "," +
           fixed6(r.auroc) + "," + fixed6(r.fpr95) + "\n";
  return out;
}

std::string sweep_pct_csv(const std::vector<SweepRow> &rows) {
  std::string out = "lo_pct,hi_pct,method,score,auroc,fpr95\n";
  for (const auto &r : rows)
    out += general(r.lo_pct) + "," + general(r.hi_pct) + "," + csv_field(r.method) + "," +
           csv_field(r.score) + "," + fixed6(r.auroc) + "," + fixed6(r.fpr95) + "\n";
  return out;
}

std::string theta_curves_csv(const BenchmarkConfig &config, const BenchmarkData &data) {
  const auto partition = fit_partition(data.id_train, config.k, config.lo_pct, config.hi_pct);
  Context ctx(config, data);

  std::vector<std::string> header = {"bin", "lower", "upper", "midpoint"};
  std::vector<std::vector<std::string>> columns;
  auto add_column = [&](const std::string &name, const std::vector<double> &values) {
    header.push_back(name);
    std::vector<std::string> col;
    for (double v : values)
      col.push_back(general(v));
    columns.push_back(std::move(col));
  };
  auto max_abs_normalised = [](std::vector<double> v) {
    double top = 0.0;
    for (double x : v)
      if (!std::isnan(x))
        top = std::max(top, std::abs(x));
    if (top > 0.0)
      for (auto &x : v)
        x /= top;
    return v;
  };

  for (const auto &spec : config.methods) {
    if (spec.name == "dice")
      continue; // shapes weights; there is no per-feature theta
    const auto r = resolve(spec, config, data, partition, ctx);
    if (is_elementwise(r.method)) {
      const auto theta = theta_curve(r.method, partition);
      add_column(r.label, theta);
      add_column(r.label + "_norm", max_abs_normalised(theta));
    } else {
      BinAccumulator acc(partition.k());
      accumulate_theta_ratios(r.method, data.id_test, partition, acc);
      for (const auto &ood : data.ood)
        accumulate_theta_ratios(r.method, ood, partition, acc);
      const auto stats = acc.finish();
      std::vector<double> count(stats.count.begin(), stats.count.end());
      add_column(r.label + "_mean", stats.mean);
      add_column(r.label + "_std", stats.std);
      add_column(r.label + "_count", count);
      add_column(r.label + "_norm", max_abs_normalised(stats.mean));
    }
  }

  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i)
    out += (i ? "," : "") + csv_field(header[i]);
  out += "\n";
  for (std::size_t k = 0; k < partition.k(); ++k) {
    out += std::to_string(k) + "," + general(partition.lower(k)) + "," +
           general(partition.upper(k)) + "," + general(partition.midpoint(k));
    for (const auto &col : columns)
      out += "," + col[k];
    out += "\n";
  }
  return out;
}

DiagnosticsReport diagnostics(const BenchmarkConfig &config, const BenchmarkData &data) {
  const auto partition = fit_partition(data.id_train, config.k, config.lo_pct, config.hi_pct);
  Context ctx(config, data);

  DiagnosticsReport out{{}, {}, partition, {}};
  const auto id_stats = mean_isfi(ctx.fit_rows(), data.classifier, partition);
  for (const auto &ood : data.ood)
    out.expectations.emplace_back(
        ood.source_tag(),
        expectation_diagnostics(id_stats, mean_isfi(ood, data.classifier, partition)));

  const FeatureMatrix *sample = &data.id_train;
  std::optional<FeatureMatrix> subset;
  if (config.diagnostics_subsample) {
    Xoshiro256StarStar rng(config.seed);
    subset = data.id_train.select_rows(
        sample_without_replacement(data.id_train.n_samples(), *config.diagnostics_subsample, rng));
    sample = &*subset;
  }
  for (const auto &spec : config.methods) {
    if (spec.name == "dice")
      continue;
    const auto r = resolve(spec, config, data, partition, ctx);
    out.changed_weight_ratios.emplace_back(r.label,
                                           changed_weight_ratio(*sample, data.classifier, r.method));
  }
  out.weight_profile = weight_value_profile(*sample, data.classifier, partition);
  return out;
}

void write_diagnostics(const DiagnosticsReport &report, const fs::path &dir) {
  std::string exp = "ood_dataset,cosine,norm_ratio\n";
  for (const auto &[name, d] : report.expectations)
    exp += csv_field(name) + "," + fixed6(d.cosine) + "," + fixed6(d.norm_ratio) + "\n";
  write_text(dir / "diagnostics.csv", exp);

  std::string cw = "method,changed_weight_ratio\n";
  for (const auto &[label, ratio] : report.changed_weight_ratios)
    cw += csv_field(label) + "," + fixed6(ratio) + "\n";
  write_text(dir / "changed_weights.csv", cw);

  const auto &p = report.partition;
  std::string wp = "bin,lower,upper,midpoint,mean,std,count\n";
  for (std::size_t k = 0; k < p.k(); ++k)
    wp += std::to_string(k) + "," + general(p.lower(k)) + "," + general(p.upper(k)) + "," +
          general(p.midpoint(k)) + "," + general(report.weight_profile.mean[k]) + "," +
          general(report.weight_profile.std[k]) + "," +
          std::to_string(report.weight_profile.count[k]) + "\n";
  write_text(dir / "weight_profile.csv", wp);
}

} // namespace oodshape::bench
