#include "cannibal/config.hpp"

#include <fstream>
#include <initializer_list>
#include <istream>
#include <limits>
#include <sstream>
#include <vector>

#include "cannibal/errors.hpp"
#include "cannibal/text.hpp"

namespace cannibal {

KeyValueConfig KeyValueConfig::parse(std::istream& in, std::string source) {
  KeyValueConfig kv;
  kv.source_ = std::move(source);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos) {
      body = body.substr(0, hash);
    }
    body = text::trim(body);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    const std::string where = kv.source_ + ":" + std::to_string(line_no);
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const std::string key(text::trim(body.substr(0, eq)));
    const std::string value(text::trim(body.substr(eq + 1)));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (!kv.entries_.emplace(key, Entry{value, line_no, false}).second) {
      throw ConfigError(where + ": duplicate key '" + key + "'");
    }
  }
  return kv;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  return parse(in, path.string());
}

bool KeyValueConfig::contains(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::string> KeyValueConfig::take(std::string_view key) {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  it->second.used = true;
  return it->second.value;
}

void KeyValueConfig::bad_value(std::string_view key, const char* expected) const {
  const auto it = entries_.find(key);
  throw ConfigError(source_ + ":" + std::to_string(it->second.line) + ": '" +
                    std::string(key) + "' must be " + expected + ", got '" +
                    it->second.value + "'");
}

std::optional<long long> KeyValueConfig::take_int(std::string_view key) {
  const auto raw = take(key);
  if (!raw) return std::nullopt;
  const auto v = text::parse_int(*raw);
  if (!v) bad_value(key, "an integer");
  return v;
}

std::optional<double> KeyValueConfig::take_real(std::string_view key) {
  const auto raw = take(key);
  if (!raw) return std::nullopt;
  const auto v = text::parse_real(*raw);
  if (!v) bad_value(key, "a number");
  return v;
}

std::optional<bool> KeyValueConfig::take_bool(std::string_view key) {
  const auto raw = take(key);
  if (!raw) return std::nullopt;
  if (*raw == "true" || *raw == "1" || *raw == "yes") return true;
  if (*raw == "false" || *raw == "0" || *raw == "no") return false;
  bad_value(key, "true or false");
}

std::optional<Date> KeyValueConfig::take_date(std::string_view key) {
  const auto raw = take(key);
  if (!raw) return std::nullopt;
  const auto v = parse_date(*raw);
  if (!v) bad_value(key, "a YYYY-MM-DD date");
  return v;
}

void KeyValueConfig::require_all_used() const {
  for (const auto& [key, entry] : entries_) {
    if (!entry.used) {
      throw ConfigError(source_ + ":" + std::to_string(entry.line) +
                        ": unknown key '" + key + "'");
    }
  }
}

namespace {

int narrow_int(long long v, std::string_view key) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("'" + std::string(key) + "' is out of range");
  }
  return static_cast<int>(v);
}

void apply_train_keys(KeyValueConfig& kv, const std::string& prefix,
                      std::initializer_list<TrainConfig*> targets) {
  const auto key = [&](const char* name) { return prefix + "." + name; };
  const auto each = [&](auto&& assign) {
    for (TrainConfig* t : targets) assign(*t);
  };
  if (auto v = kv.take_int(key("n_rounds"))) {
    each([&](TrainConfig& t) { t.n_rounds = narrow_int(*v, key("n_rounds")); });
  }
  if (auto v = kv.take_real(key("learning_rate"))) {
    each([&](TrainConfig& t) { t.learning_rate = *v; });
  }
  if (auto v = kv.take_int(key("max_depth"))) {
    each([&](TrainConfig& t) { t.max_depth = narrow_int(*v, key("max_depth")); });
  }
  if (auto v = kv.take_real(key("lambda"))) each([&](TrainConfig& t) { t.lambda = *v; });
  if (auto v = kv.take_real(key("gamma"))) each([&](TrainConfig& t) { t.gamma = *v; });
  if (auto v = kv.take_real(key("min_child_weight"))) {
    each([&](TrainConfig& t) { t.min_child_weight = *v; });
  }
  if (auto v = kv.take_int(key("min_samples_leaf"))) {
    each([&](TrainConfig& t) {
      t.min_samples_leaf = narrow_int(*v, key("min_samples_leaf"));
    });
  }
  if (auto v = kv.take_real(key("base_score"))) {
    each([&](TrainConfig& t) { t.base_score = *v; });
  }
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    const auto t = text::trim(item);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

}  // namespace

PipelineConfig pipeline_config_from(KeyValueConfig& kv) {
  PipelineConfig cfg = default_pipeline_config();
  TrainConfig* stages[] = {&cfg.stage1, &cfg.stage2, &cfg.stage3};

  // train.* first, so that stageN.* can override it.
  apply_train_keys(kv, "train", {&cfg.stage1, &cfg.stage2, &cfg.stage3});
  apply_train_keys(kv, "stage1", {&cfg.stage1});
  apply_train_keys(kv, "stage2", {&cfg.stage2});
  apply_train_keys(kv, "stage3", {&cfg.stage3});

  if (auto v = kv.take_date("cutoff_date")) cfg.cutoff = *v;
  if (auto v = kv.take_int("horizon")) {
    if (*v < 1) throw ConfigError("horizon must be >= 1");
    cfg.horizon = narrow_int(*v, "horizon");
  }
  if (auto v = kv.take("finetune_mode")) cfg.finetune_mode = parse_finetune_mode(*v);
  if (auto v = kv.take_bool("clamp_negative")) cfg.clamp_negative = *v;
  if (auto v = kv.take_int("seed")) {
    if (*v < 0) throw ConfigError("seed must be non-negative");
    cfg.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = kv.take_int("n_threads")) {
    for (TrainConfig* stage : stages) stage->n_threads = narrow_int(*v, "n_threads");
  }
  for (TrainConfig* stage : stages) stage->seed = cfg.seed;
  kv.require_all_used();
  cfg.validate();
  return cfg;
}

ScenarioConfig scenario_config_from(KeyValueConfig& kv) {
  ScenarioConfig s;
  const auto int_key = [&](const char* key, int& field) {
    if (auto v = kv.take_int(key)) field = narrow_int(*v, key);
  };
  const auto real_key = [&](const char* key, double& field) {
    if (auto v = kv.take_real(key)) field = *v;
  };
  if (auto v = kv.take("category")) s.category = *v;
  if (auto v = kv.take_date("start_date")) s.start_date = *v;
  int_key("n_existing_products", s.n_existing_products);
  int_key("n_npi_products", s.n_npi_products);
  int_key("total_weeks", s.total_weeks);
  int_key("cutoff_week", s.cutoff_week);
  // Launch defaults to the cutoff unless given explicitly.
  s.npi_launch_week = s.cutoff_week;
  int_key("npi_launch_week", s.npi_launch_week);
  real_key("category_total_base", s.category_total_base);
  real_key("promo_rate", s.promo_rate);
  real_key("promo_lift", s.promo_lift);
  real_key("share_stealing_rate", s.share_stealing_rate);
  real_key("noise_sd", s.noise_sd);
  real_key("drift_sd", s.drift_sd);
  real_key("attractiveness_spread", s.attractiveness_spread);
  if (auto v = kv.take_int("seed")) {
    if (*v < 0) throw ConfigError("seed must be non-negative");
    s.seed = static_cast<std::uint64_t>(*v);
  }
  if (auto v = kv.take("seasonal_spikes")) {
    s.seasonal_spikes.clear();
    if (*v != "none") {
      for (const std::string& item : split_list(*v, ',')) {
        const auto parts = split_list(item, ':');
        const auto week = parts.size() == 2 ? text::parse_int(parts[0]) : std::nullopt;
        const auto mult = parts.size() == 2 ? text::parse_real(parts[1]) : std::nullopt;
        if (!week || !mult) {
          throw ConfigError("seasonal_spikes entry '" + item +
                            "' must be week:multiplier");
        }
        s.seasonal_spikes[narrow_int(*week, "seasonal_spikes")] = *mult;
      }
    }
  }
  if (auto v = kv.take("promo_calendar")) {
    for (const std::string& item : split_list(*v, ',')) {
      const auto parts = split_list(item, ':');
      const auto product = parts.size() == 3 ? text::parse_int(parts[0]) : std::nullopt;
      const auto week = parts.size() == 3 ? text::parse_int(parts[1]) : std::nullopt;
      if (!product || !week) {
        throw ConfigError("promo_calendar entry '" + item +
                          "' must be product:week:token");
      }
      s.promo_calendar.push_back({narrow_int(*product, "promo_calendar"),
                                  narrow_int(*week, "promo_calendar"), parts[2]});
    }
  }
  kv.require_all_used();
  return s;
}

}  // namespace cannibal
