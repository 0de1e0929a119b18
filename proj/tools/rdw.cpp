// rdw: file-based pipeline driver.
//
//   rdw synth     --out DIR [--seed N] [--config FILE] [--key=value ...]
//   rdw featurize --in SYNTH_DIR|TRACE --out DIR
//   rdw train     --in WINDOWS --out DIR [--seed N]
//   rdw eval      --model FILE --in WINDOWS --out DIR
//   rdw simulate  [--model FILE] --out DIR [--seed N]
//   rdw ellipse   --in TRACE --out DIR
//   rdw report    --in RUN_DIR --out DIR
//
// Failures print {"error", "message", "exit_code"} as JSON on stderr.

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "rdw/config.hpp"
#include "rdw/error.hpp"
#include "rdw/io.hpp"
#include "rdw/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
namespace pl = rdw::pipeline;

enum ExitCode : int {
  kOk = 0,
  kGeneric = 1,
  kInvalidArgument = 2,
  kIo = 3,
  kSchema = 4,
  kSingleClass = 5,
  kTimeout = 6,
};

int exit_code(rdw::ErrorKind kind) {
  switch (kind) {
    case rdw::ErrorKind::invalid_argument: return kInvalidArgument;
    case rdw::ErrorKind::io: return kIo;
    case rdw::ErrorKind::schema: return kSchema;
    case rdw::ErrorKind::single_class: return kSingleClass;
    case rdw::ErrorKind::timeout: return kTimeout;
    case rdw::ErrorKind::shape: return kGeneric;
  }
  return kGeneric;
}

int report_error(const std::string& kind, const std::string& message, int code) {
  const nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
  std::cerr << j.dump() << '\n';
  return code;
}

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("rdw");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("RDW_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::info);
}

// `--key=value` arguments whose key is not a named flag become config overrides.
std::vector<std::string> split_overrides(int argc, char** argv, std::vector<std::string>& rest) {
  static const std::set<std::string> flags{"config", "seed", "out", "in", "model", "help"};
  std::vector<std::string> overrides;
  for (int i = 0; i < argc; ++i) {
    const std::string a = argv[i];
    const auto eq = a.find('=');
    if (i > 0 && a.rfind("--", 0) == 0 && eq != std::string::npos && !flags.count(a.substr(2, eq - 2)))
      overrides.push_back(a.substr(2));
    else
      rest.push_back(a);
  }
  return overrides;
}

struct Args {
  std::optional<std::string> config;
  std::uint64_t seed = 42;
  std::string out;
  std::string in;
  std::optional<std::string> model;
};

}  // namespace

int main(int argc, char** argv) {
  setup_logging();

  std::vector<std::string> rest;
  const auto overrides = split_overrides(argc, argv, rest);

  CLI::App app{"Saccade-triggered redirected walking pipeline"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub, bool needs_in) {
    sub->add_option("--config", args.config, "flat key = value config file");
    sub->add_option("--seed", args.seed, "global seed");
    sub->add_option("--out", args.out, "output directory")->required();
    if (needs_in) sub->add_option("--in", args.in, "input path")->required();
  };
  auto* synth = app.add_subcommand("synth", "generate synthetic head and gaze traces");
  add_common(synth, false);
  auto* featurize = app.add_subcommand("featurize", "label traces and cut feature windows");
  add_common(featurize, true);
  auto* train = app.add_subcommand("train", "train the saccade classifier");
  add_common(train, true);
  auto* eval = app.add_subcommand("eval", "score a model on a window split");
  add_common(eval, true);
  eval->add_option("--model", args.model, "model file")->required();
  auto* simulate = app.add_subcommand("simulate", "run paired redirected and reset-only walks");
  add_common(simulate, false);
  simulate->add_option("--model", args.model, "model file (omit for the oracle predictor)");
  auto* ellipse = app.add_subcommand("ellipse", "fit the gaze hot-region ellipse");
  add_common(ellipse, true);
  auto* report = app.add_subcommand("report", "consolidate stage outputs");
  add_common(report, true);

  try {
    std::vector<char*> cargv;
    for (auto& s : rest) cargv.push_back(s.data());
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), kInvalidArgument);
  }

  try {
    rdw::Config cfg = args.config ? rdw::Config::load(*args.config) : rdw::Config{};
    for (const auto& kv : overrides) cfg.apply_override(kv);
    const fs::path out = args.out;
    const fs::path in = args.in;
    const auto progress = [](const std::string& msg) { spdlog::info("{}", msg); };

    std::string stage;
    nlohmann::json summary;
    bool seeded = true;
    if (synth->parsed()) {
      stage = "synth";
      summary = pl::run_synth(cfg, args.seed, out);
    } else if (featurize->parsed()) {
      stage = "featurize";
      seeded = false;
      summary = pl::run_featurize(in, out);
    } else if (train->parsed()) {
      stage = "train";
      summary = pl::run_train(cfg, args.seed, in, out, progress);
    } else if (eval->parsed()) {
      stage = "eval";
      seeded = false;
      summary = pl::run_eval(cfg, *args.model, in, out);
    } else if (simulate->parsed()) {
      stage = "simulate";
      std::optional<fs::path> model;
      if (args.model) model = *args.model;
      summary = pl::run_simulate(cfg, args.seed, model, out);
    } else if (ellipse->parsed()) {
      stage = "ellipse";
      seeded = false;
      summary = pl::run_ellipse(cfg, in, out);
    } else {
      stage = "report";
      seeded = false;
      summary = pl::run_report(in, out);
    }

    // A shared config file legitimately carries keys for other stages, so only flag
    // unknown keys and explicit overrides this stage ignores.
    const auto known = pl::known_keys();
    for (const auto& key : cfg.unused()) {
      const bool overridden = std::any_of(overrides.begin(), overrides.end(),
                                          [&](const std::string& kv) { return kv.substr(0, kv.find('=')) == key; });
      if (!known.count(key)) spdlog::warn("unknown config key '{}'", key);
      else if (overridden) spdlog::warn("config key '{}' is not used by {}", key, stage);
    }
    auto echo = rdw::io::open_out(out / "effective_config.txt");
    echo << "# rdw " << stage << "\n";
    if (seeded) echo << "seed = " << args.seed << '\n';
    echo << cfg.effective();
    spdlog::info("{} done, outputs in {}", stage, out.string());
    spdlog::debug("{}", summary.dump());
    return kOk;
  } catch (const rdw::Error& e) {
    return report_error(rdw::to_string(e.kind()), e.what(), exit_code(e.kind()));
  } catch (const nlohmann::json::exception& e) {
    return report_error("schema", e.what(), kSchema);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), kGeneric);
  }
}
