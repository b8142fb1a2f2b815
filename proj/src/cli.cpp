#include "cannibal/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "cannibal/config.hpp"
#include "cannibal/dataset.hpp"
#include "cannibal/errors.hpp"
#include "cannibal/manifest.hpp"
#include "cannibal/pipeline.hpp"
#include "cannibal/report.hpp"
#include "cannibal/synthgen.hpp"

namespace fs = std::filesystem;

namespace cannibal::cli {

namespace {

struct UsageError : Error {
  using Error::Error;
};

// Output goes to `<out>.partial` and is renamed into place only on success.
class StagedDirectory {
 public:
  StagedDirectory(fs::path target, bool force)
      : target_(std::move(target)), staging_(target_) {
    staging_ += ".partial";
    if (fs::exists(target_) && !force) {
      throw UsageError("output directory " + target_.string() +
                       " exists; pass --force to replace it");
    }
    fs::remove_all(staging_);
    fs::create_directories(staging_);
  }
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;
  ~StagedDirectory() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(staging_, ec);
    }
  }

  const fs::path& path() const { return staging_; }

  void commit() {
    fs::remove_all(target_);
    fs::rename(staging_, target_);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path staging_;
  bool committed_ = false;
};

class ArtifactWriter {
 public:
  explicit ArtifactWriter(const fs::path& root) : root_(root) {}

  template <typename Fn>
  void write(const std::string& relative, Fn&& body) {
    std::ostringstream buf;
    body(buf);
    const fs::path path = root_ / relative;
    fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary);
    const std::string bytes = std::move(buf).str();
    file << bytes;
    if (!file.flush()) throw Error("cannot write " + path.string());
    written_.push_back({relative, sha256_hex(bytes)});
  }

  const std::vector<FileDigest>& written() const { return written_; }

 private:
  fs::path root_;
  std::vector<FileDigest> written_;
};

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream file(path, std::ios::binary);
  file << text << '\n';
  if (!file.flush()) throw Error("cannot write " + path.string());
}

PanelDataset category_slice(const PanelDataset& data, const std::string& category) {
  std::vector<SalesRecord> rows;
  for (const SalesRecord& r : data.records()) {
    if (r.category == category) rows.push_back(r);
  }
  return PanelDataset(std::move(rows));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

int guarded(std::ostream& err, const auto& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidScenarioError& e) {
    err << "invalid scenario: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int cmd_synth(const SynthOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    KeyValueConfig kv = KeyValueConfig::load(options.scenario);
    const ScenarioConfig scenario = scenario_config_from(kv);
    const SyntheticPanel panel = generate(scenario);

    StagedDirectory dir(options.out, options.force);
    ArtifactWriter files(dir.path());
    files.write("sales.csv", [&](std::ostream& o) {
      write_sales_csv(panel.dataset.records(), o);
    });
    files.write("totals.csv",
                [&](std::ostream& o) { write_totals_csv(panel.totals, o); });
    files.write("actuals.csv", [&](std::ostream& o) {
      write_sales_csv(panel.actuals.records(), o);
    });

    RunManifest manifest;
    manifest.command = "synth";
    manifest.config_hash = sha256_file(options.scenario);
    manifest.seed = scenario.seed;
    manifest.inputs = {{options.scenario.filename().string(), manifest.config_hash}};
    manifest.artifacts = files.written();
    manifest.elapsed_seconds = seconds_since(start);
    const std::string json = manifest.to_json();
    write_text(dir.path() / "manifest.json", json);
    dir.commit();
    out << json << '\n';
    return kExitOk;
  });
}

int cmd_run(const RunOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto start = std::chrono::steady_clock::now();
    KeyValueConfig kv = KeyValueConfig::load(options.config);
    PipelineConfig config = pipeline_config_from(kv);
    if (options.seed) {
      config.seed = *options.seed;
      for (TrainConfig* s : {&config.stage1, &config.stage2, &config.stage3}) {
        s->seed = config.seed;
      }
    }

    StagedDirectory dir(options.out, options.force);
    const PanelDataset data = load_csv(options.data);
    const CategoryTotals totals = load_totals_csv(options.totals);
    std::optional<PanelDataset> hidden;
    if (options.actuals) hidden = load_csv(*options.actuals);

    RunManifest manifest;
    manifest.command = "run";
    manifest.config_hash = sha256_file(options.config);
    manifest.seed = config.seed;
    manifest.inputs = {{"data", sha256_file(options.data)},
                       {"totals", sha256_file(options.totals)},
                       {"config", manifest.config_hash}};
    if (options.actuals) {
      manifest.inputs.push_back({"actuals", sha256_file(*options.actuals)});
    }

    std::vector<ComparisonReport> reports;
    for (const std::string& category : data.categories()) {
      const PanelDataset slice = category_slice(data, category);
      std::optional<PanelDataset> hidden_slice;
      if (hidden) hidden_slice = category_slice(*hidden, category);
      reports.push_back(run_comparison(
          slice, totals, hidden_slice ? &*hidden_slice : nullptr, config));
    }
    if (reports.empty()) throw EmptyInputError("no rows in " + options.data.string());

    ArtifactWriter files(dir.path());
    const std::string run_id = manifest.run_id();
    files.write("summary.csv", [&](std::ostream& o) {
      write_summary_csv(reports, run_id, o);
    });
    for (const ComparisonReport& report : reports) {
      for (const ProductSeries& series : report.products) {
        const std::string stem = safe_file_stem(series.product);
        files.write("products/" + stem + ".csv",
                    [&](std::ostream& o) { write_series_csv(series, o); });
        if (options.svg) {
          files.write("charts/" + stem + ".svg", [&](std::ostream& o) {
            write_series_svg(series, report.category + " / " + series.product, o);
          });
        }
      }
    }
    manifest.artifacts = files.written();
    manifest.elapsed_seconds = seconds_since(start);
    write_text(dir.path() / "manifest.json", manifest.to_json());
    dir.commit();

    for (const ComparisonReport& r : reports) {
      char line[256];
      std::snprintf(line, sizeof line,
                    "%s: lags=%d baseline=%.4f three_stage=%.4f\n",
                    r.category.c_str(), r.lags, r.baseline_accuracy,
                    r.three_stage_accuracy);
      out << line;
    }
    out << "run " << run_id << " -> " << options.out.string() << '\n';
    return kExitOk;
  });
}

int cmd_validate(const ValidateOptions& options, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&] {
    const PanelDataset data = load_csv(options.data);
    const CategoryTotals totals = load_totals_csv(options.totals);
    const std::vector<Violation> violations = validate_panel(data, totals);
    for (const Violation& v : violations) {
      out << "line " << v.line << ": " << v.message << '\n';
    }
    if (violations.empty()) {
      out << "ok: " << data.size() << " rows\n";
      return kExitOk;
    }
    out << violations.size() << " violation(s)\n";
    return kExitFailure;
  });
}

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cannibalization-aware sales forecasting"};
  app.name("cannibal");
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic sales panel");
  synth_cmd->add_option("--scenario", synth.scenario, "Scenario config file")
      ->required()
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_flag("--force", synth.force, "Replace an existing output directory");

  RunOptions run_opts;
  std::optional<std::string> actuals;
  std::optional<unsigned long long> seed;
  auto* run_cmd = app.add_subcommand("run", "Compare baseline and three-stage forecasts");
  run_cmd->add_option("--data", run_opts.data, "Sales CSV")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--totals", run_opts.totals, "Category totals CSV")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--config", run_opts.config, "Pipeline config file")
      ->required()
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--out", run_opts.out, "Output directory")->required();
  run_cmd->add_option("--actuals", actuals, "Sales CSV with true test-week sales")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--seed", seed, "Override the config seed");
  run_cmd->add_flag("--svg", run_opts.svg, "Also write SVG charts");
  run_cmd->add_flag("--force", run_opts.force, "Replace an existing output directory");

  ValidateOptions validate;
  auto* validate_cmd = app.add_subcommand("validate", "Check a sales panel and its totals");
  validate_cmd->add_option("--data", validate.data, "Sales CSV")
      ->required()
      ->check(CLI::ExistingFile);
  validate_cmd->add_option("--totals", validate.totals, "Category totals CSV")
      ->required()
      ->check(CLI::ExistingFile);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (*synth_cmd) return cmd_synth(synth, out, err);
  if (*run_cmd) {
    if (actuals) run_opts.actuals = *actuals;
    run_opts.seed = seed;
    return cmd_run(run_opts, out, err);
  }
  return cmd_validate(validate, out, err);
}

void configure_logging() {
  auto logger = spdlog::get("cannibal");
  if (!logger) logger = spdlog::stderr_color_mt("cannibal");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::warn;
  if (const char* env = std::getenv("CF_LOG")) {
    level = spdlog::level::from_str(env);
  }
  spdlog::set_level(level);
}

}  // namespace cannibal::cli
