#include "fedfm/config.hpp"

#include <cmath>
#include <set>

#include "fedfm/dataset.hpp"
#include "fedfm/errors.hpp"
#include "fedfm/faults.hpp"
#include "fedfm/io.hpp"
#include "fedfm/learner.hpp"
#include "fedfm/selection.hpp"

namespace fedfm::cli {

using nlohmann::json;

namespace {

// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_.empty() ? "config" : path_, "expected an object");
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : kEmpty, field(key));
  }

  void get(const char* key, double& out) {
    if (const json* v = take(key)) {
      if (!v->is_number()) fail(field(key), "expected a number");
      out = v->get<double>();
    }
  }

  void get(const char* key, std::optional<double>& out) {
    if (const json* v = take(key)) {
      if (v->is_null()) {
        out.reset();
      } else {
        if (!v->is_number()) fail(field(key), "expected a number or null");
        out = v->get<double>();
      }
    }
  }

  void get(const char* key, int& out) {
    if (const json* v = take(key)) out = static_cast<int>(integer(*v, field(key), false));
  }

  void get(const char* key, std::size_t& out) {
    if (const json* v = take(key)) out = static_cast<std::size_t>(integer(*v, field(key), true));
  }

  void get(const char* key, bool& out) {
    if (const json* v = take(key)) {
      if (!v->is_boolean()) fail(field(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  void get(const char* key, std::string& out) {
    if (const json* v = take(key)) {
      if (!v->is_string()) fail(field(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  template <class T>
  void get(const char* key, std::vector<T>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_array()) fail(field(key), "expected an array");
    std::vector<T> items;
    for (std::size_t i = 0; i < v->size(); ++i) {
      const std::string where = field(key) + "[" + std::to_string(i) + "]";
      const json& e = (*v)[i];
      if constexpr (std::is_same_v<T, double>) {
        if (!e.is_number()) fail(where, "expected a number");
        items.push_back(e.get<double>());
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!e.is_string()) fail(where, "expected a string");
        items.push_back(e.get<std::string>());
      } else if constexpr (std::is_same_v<T, int>) {
        items.push_back(static_cast<int>(integer(e, where, false)));
      } else {
        items.push_back(static_cast<T>(integer(e, where, true)));
      }
    }
    out = std::move(items);
  }

  void get(const char* key, std::map<int, std::vector<int>>& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_object()) fail(field(key), "expected an object of class -> node ids");
    std::map<int, std::vector<int>> m;
    for (const auto& [k, ids] : v->items()) {
      int cls = 0;
      try {
        cls = static_cast<int>(io::parse_int(k));
      } catch (const Error&) {
        fail(field(key), "class key '" + k + "' is not an integer");
      }
      const json wrapped = json::object({{k, ids}});
      Section holder(wrapped, field(key));
      holder.get(k.c_str(), m[cls]);
    }
    out = std::move(m);
  }

  void get(const char* key, topology::ClippedNormal& out) {
    if (!j_.contains(key)) return;
    auto s = sub(key);
    s.get("mean", out.mean);
    s.get("std", out.std);
    s.get("floor", out.floor);
    s.finish();
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) fail(field(k.c_str()), "unknown key");
    }
  }

  [[noreturn]] static void fail(const std::string& where, const std::string& what) {
    throw ConfigError(where + ": " + what);
  }

 private:
  const json* take(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  static long long integer(const json& v, const std::string& where, bool non_negative) {
    if (!v.is_number_integer()) fail(where, "expected an integer");
    if (v.is_number_unsigned()) {
      const auto u = v.get<std::uint64_t>();
      return static_cast<long long>(u);
    }
    const auto i = v.get<long long>();
    if (non_negative && i < 0) fail(where, "must be non-negative");
    return i;
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json normal_json(const topology::ClippedNormal& n) {
  return {{"mean", n.mean}, {"std", n.std}, {"floor", n.floor}};
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void check(bool ok, const std::string& where, const std::string& what) {
  if (!ok) throw ConfigError(where + ": " + what);
}

}  // namespace

ScenarioConfig from_json(const json& doc) {
  ScenarioConfig cfg;
  Section root(doc, "");

  {
    auto s = root.sub("dataset");
    auto& d = cfg.dataset;
    s.get("source", d.source);
    s.get("n_classes", d.n_classes);
    s.get("n_per_class", d.n_per_class);
    s.get("dim", d.dim);
    s.get("spread", d.spread);
    s.get("test_fraction", d.test_fraction);
    s.get("train_images", d.train_images);
    s.get("train_labels", d.train_labels);
    s.get("test_images", d.test_images);
    s.get("test_labels", d.test_labels);
    s.get("train_limit", d.train_limit);
    s.get("test_limit", d.test_limit);
    s.finish();
  }
  {
    auto s = root.sub("ecosystem");
    auto& e = cfg.ecosystem;
    s.get("K", e.K);
    s.get("power", e.power);
    s.get("bandwidth", e.bandwidth);
    auto p = s.sub("partition");
    p.get("kind", e.partition);
    p.get("mu_frac", e.mu_frac);
    p.get("sigma_frac", e.sigma_frac);
    p.get("exclusive_map", e.exclusive_map);
    p.get("exclusive_layout", e.exclusive_layout);
    p.finish();
    s.finish();
  }
  {
    auto s = root.sub("model");
    s.get("hidden_layers", cfg.model.hidden);
    s.get("activation", cfg.model.activation);
    s.finish();
  }
  {
    auto s = root.sub("train");
    s.get("learning_rate", cfg.train.learning_rate);
    s.get("local_epochs", cfg.train.local_epochs);
    s.get("batch_size", cfg.train.batch_size);
    s.finish();
  }
  {
    auto s = root.sub("score");
    s.get("alpha", cfg.score.alpha);
    s.get("kappa", cfg.score.kappa);
    s.finish();
  }
  {
    auto s = root.sub("selection");
    s.get("fraction", cfg.selection.fraction);
    s.get("strategy", cfg.selection.strategy);
    s.finish();
  }
  {
    auto s = root.sub("convergence");
    s.get("loss_threshold", cfg.convergence.loss_threshold);
    s.get("stability_window", cfg.convergence.stability_window);
    s.get("stability_epsilon", cfg.convergence.stability_epsilon);
    s.get("max_rounds", cfg.convergence.max_rounds);
    s.finish();
  }
  {
    auto s = root.sub("timing");
    s.get("compute_cost_per_sample_epoch", cfg.timing.compute_cost_per_sample_epoch);
    s.get("model_bytes", cfg.timing.model_bytes);
    s.get("timeout_s", cfg.timing.timeout_s);
    s.get("timeout_percentile", cfg.timing.timeout_percentile);
    s.finish();
  }
  {
    auto s = root.sub("failures");
    s.get("fraction", cfg.failures.fraction);
    s.get("round", cfg.failures.round);
    s.get("mode", cfg.failures.mode);
    s.finish();
  }
  root.get("algorithm", cfg.algorithm);
  root.get("seeds", cfg.seeds);
  {
    auto s = root.sub("sweep");
    auto& w = cfg.sweep;
    s.get("fractions", w.fractions);
    s.get("strategies", w.strategies);
    s.get("failure_fractions", w.failure_fractions);
    s.get("contributing", w.contributing);
    s.get("eta2_K", w.eta2_K);
    s.get("exclusive_classes", w.exclusive_classes);
    s.get("mitigation_fractions", w.mitigation_fractions);
    s.finish();
  }
  {
    auto s = root.sub("output");
    s.get("audit", cfg.audit);
    s.finish();
  }
  root.finish();
  return cfg;
}

json to_json(const ScenarioConfig& cfg) {
  const auto& d = cfg.dataset;
  const auto& e = cfg.ecosystem;
  json exclusive = json::object();
  for (const auto& [cls, ids] : e.exclusive_map) exclusive[std::to_string(cls)] = ids;
  const auto& w = cfg.sweep;
  return {
      {"dataset",
       {{"source", d.source},
        {"n_classes", d.n_classes},
        {"n_per_class", d.n_per_class},
        {"dim", d.dim},
        {"spread", d.spread},
        {"test_fraction", d.test_fraction},
        {"train_images", d.train_images},
        {"train_labels", d.train_labels},
        {"test_images", d.test_images},
        {"test_labels", d.test_labels},
        {"train_limit", d.train_limit},
        {"test_limit", d.test_limit}}},
      {"ecosystem",
       {{"K", e.K},
        {"power", normal_json(e.power)},
        {"bandwidth", normal_json(e.bandwidth)},
        {"partition",
         {{"kind", e.partition},
          {"mu_frac", e.mu_frac},
          {"sigma_frac", e.sigma_frac},
          {"exclusive_map", exclusive},
          {"exclusive_layout", e.exclusive_layout}}}}},
      {"model", {{"hidden_layers", cfg.model.hidden}, {"activation", cfg.model.activation}}},
      {"train",
       {{"learning_rate", cfg.train.learning_rate},
        {"local_epochs", cfg.train.local_epochs},
        {"batch_size", cfg.train.batch_size}}},
      {"score", {{"alpha", optional_json(cfg.score.alpha)}, {"kappa", optional_json(cfg.score.kappa)}}},
      {"selection", {{"fraction", cfg.selection.fraction}, {"strategy", cfg.selection.strategy}}},
      {"convergence",
       {{"loss_threshold", cfg.convergence.loss_threshold},
        {"stability_window", cfg.convergence.stability_window},
        {"stability_epsilon", cfg.convergence.stability_epsilon},
        {"max_rounds", cfg.convergence.max_rounds}}},
      {"timing",
       {{"compute_cost_per_sample_epoch", optional_json(cfg.timing.compute_cost_per_sample_epoch)},
        {"model_bytes", optional_json(cfg.timing.model_bytes)},
        {"timeout_s", optional_json(cfg.timing.timeout_s)},
        {"timeout_percentile", cfg.timing.timeout_percentile}}},
      {"failures",
       {{"fraction", cfg.failures.fraction}, {"round", cfg.failures.round}, {"mode", cfg.failures.mode}}},
      {"algorithm", cfg.algorithm},
      {"seeds", cfg.seeds},
      {"sweep",
       {{"fractions", w.fractions},
        {"strategies", w.strategies},
        {"failure_fractions", w.failure_fractions},
        {"contributing", w.contributing},
        {"eta2_K", w.eta2_K},
        {"exclusive_classes", w.exclusive_classes},
        {"mitigation_fractions", w.mitigation_fractions}}},
      {"output", {{"audit", cfg.audit}}},
  };
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--override '" + std::string(assignment) + "': expected key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("--override '" + key + "': empty path component");
    if (!node->is_object()) throw ConfigError("--override '" + key + "': '" + part + "' is not inside an object");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

void validate(const ScenarioConfig& cfg) {
  const auto& d = cfg.dataset;
  check(d.source == "blobs" || d.source == "idx", "dataset.source", "must be 'blobs' or 'idx'");
  if (d.source == "blobs") {
    check(d.n_classes >= 2, "dataset.n_classes", "must be >= 2");
    check(d.n_per_class >= 1, "dataset.n_per_class", "must be positive");
    check(d.dim >= 1, "dataset.dim", "must be positive");
    check(d.spread > 0.0, "dataset.spread", "must be positive");
    check(d.test_fraction > 0.0 && d.test_fraction < 1.0, "dataset.test_fraction", "must be in (0, 1)");
  } else {
    check(!d.train_images.empty() && !d.train_labels.empty() && !d.test_images.empty() &&
              !d.test_labels.empty(),
          "dataset", "idx source needs train_images, train_labels, test_images and test_labels");
  }

  const auto& e = cfg.ecosystem;
  check(e.K >= 1, "ecosystem.K", "must be positive");
  e.power.validate("ecosystem.power");
  e.bandwidth.validate("ecosystem.bandwidth");
  try {
    data::parse_partition_kind(e.partition);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("ecosystem.partition.kind: ") + err.what());
  }
  check(e.mu_frac >= 0.0 && e.sigma_frac >= 0.0, "ecosystem.partition", "mu_frac and sigma_frac must be >= 0");
  check(e.exclusive_layout.empty() || e.exclusive_layout == "class-round-robin",
        "ecosystem.partition.exclusive_layout", "must be empty or 'class-round-robin'");
  check(e.exclusive_layout.empty() || e.exclusive_map.empty(), "ecosystem.partition",
        "exclusive_map and exclusive_layout are mutually exclusive");

  for (auto h : cfg.model.hidden) check(h >= 1, "model.hidden_layers", "layer widths must be positive");
  try {
    learner::parse_activation(cfg.model.activation);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("model.activation: ") + err.what());
  }

  check(cfg.train.learning_rate > 0.0, "train.learning_rate", "must be positive");
  check(cfg.train.local_epochs >= 1, "train.local_epochs", "must be >= 1");
  check(cfg.train.batch_size >= 1, "train.batch_size", "must be >= 1");

  check(!cfg.score.alpha || *cfg.score.alpha > 0.0, "score.alpha", "must be positive");
  check(!cfg.score.kappa || *cfg.score.kappa > 0.0, "score.kappa", "must be positive");

  check(cfg.selection.fraction > 0.0 && cfg.selection.fraction <= 1.0, "selection.fraction", "must be in (0, 1]");
  try {
    selection::parse_strategy(cfg.selection.strategy);
    for (const auto& s : cfg.sweep.strategies) selection::parse_strategy(s);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("selection.strategy: ") + err.what());
  }

  cfg.convergence.validate();

  const auto& t = cfg.timing;
  check(!t.compute_cost_per_sample_epoch || *t.compute_cost_per_sample_epoch > 0.0,
        "timing.compute_cost_per_sample_epoch", "must be positive");
  check(!t.model_bytes || *t.model_bytes > 0.0, "timing.model_bytes", "must be positive");
  check(!t.timeout_s || *t.timeout_s > 0.0, "timing.timeout_s", "must be positive");
  check(t.timeout_percentile > 0.0 && t.timeout_percentile <= 1.0, "timing.timeout_percentile",
        "must be in (0, 1]");

  check(cfg.failures.fraction >= 0.0 && cfg.failures.fraction <= 1.0, "failures.fraction", "must be in [0, 1]");
  check(cfg.failures.round >= 1, "failures.round", "must be >= 1");
  try {
    faults::parse_mode(cfg.failures.mode);
    aggregator::parse_algorithm(cfg.algorithm);
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("failures.mode/algorithm: ") + err.what());
  }

  check(!cfg.seeds.empty(), "seeds", "must not be empty");
  for (double f : cfg.sweep.fractions) check(f > 0.0 && f <= 1.0, "sweep.fractions", "entries must be in (0, 1]");
  for (double f : cfg.sweep.failure_fractions) {
    check(f >= 0.0 && f <= 1.0, "sweep.failure_fractions", "entries must be in [0, 1]");
  }
  for (double f : cfg.sweep.mitigation_fractions) {
    check(f >= 0.0 && f <= 1.0, "sweep.mitigation_fractions", "entries must be in [0, 1]");
  }
  check(cfg.sweep.eta2_K >= 1, "sweep.eta2_K", "must be positive");
  for (int c : cfg.sweep.contributing) check(c >= 1, "sweep.contributing", "entries must be positive");
  check(cfg.sweep.exclusive_classes >= 1 && (d.source != "blobs" || cfg.sweep.exclusive_classes < d.n_classes),
        "sweep.exclusive_classes", "must be in [1, n_classes)");
}

ScenarioConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    const std::string text = io::read_file(path);
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  }
  for (const auto& o : overrides) apply_override(doc, o);
  auto cfg = from_json(doc);
  validate(cfg);
  return cfg;
}

}  // namespace fedfm::cli
