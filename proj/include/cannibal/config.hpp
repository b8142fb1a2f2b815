#ifndef CANNIBAL_CONFIG_HPP
#define CANNIBAL_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "cannibal/pipeline.hpp"
#include "cannibal/synthgen.hpp"

namespace cannibal {

/// Flat `key = value` file. `#` starts a comment; blank lines are ignored.
/// Every getter marks its key as used so leftovers can be reported as typos.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, std::string source = "<config>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(std::string_view key) const;
  std::optional<std::string> take(std::string_view key);
  std::optional<long long> take_int(std::string_view key);
  std::optional<double> take_real(std::string_view key);
  std::optional<bool> take_bool(std::string_view key);
  std::optional<Date> take_date(std::string_view key);

  /// ConfigError naming the first key nobody asked for.
  void require_all_used() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
    bool used = false;
  };

  [[noreturn]] void bad_value(std::string_view key, const char* expected) const;

  std::string source_;
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Keys: cutoff_date, horizon, finetune_mode (squared|literal),
/// clamp_negative, seed, n_threads, and per-engine settings
/// `train.<param>` (all stages) or `stage1|stage2|stage3.<param>` with
/// <param> one of n_rounds, learning_rate, max_depth, lambda, gamma,
/// min_child_weight, min_samples_leaf, base_score.
PipelineConfig pipeline_config_from(KeyValueConfig& kv);

/// Keys mirror ScenarioConfig fields. seasonal_spikes is
/// "woy:multiplier,..." (or "none"); promo_calendar is
/// "product:week:token,...".
ScenarioConfig scenario_config_from(KeyValueConfig& kv);

}  // namespace cannibal

#endif  // CANNIBAL_CONFIG_HPP
