#include "hsmgnn/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "hsmgnn/checkpoint.hpp"
#include "hsmgnn/data.hpp"
#include "hsmgnn/error.hpp"
#include "hsmgnn/run_config.hpp"
#include "hsmgnn/training.hpp"

namespace hsmgnn {

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 1;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const Error*>(&e) != nullptr) return 2;
  return 1;
}

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());
  return fs::path(dir);
}

data::SampleSet load_with_groups(const std::string& path) {
  data::SampleSet set = data::load_dataset(path);
  data::load_groups(path, set);
  return set;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

json metrics_object(const metrics::MetricsReport& r) {
  return json::parse(metrics::to_json(r));
}

std::string headline_line(const std::string& split, const metrics::MetricsReport& r) {
  std::ostringstream out;
  out.precision(10);
  if (r.task == Task::kRegression) {
    out << split << " rmse=" << r.regression.rmse << " mse=" << r.regression.mse
        << " mae=" << r.regression.mae;
  } else {
    out << split << " accuracy=" << r.classification.accuracy << " macro_f1=" << r.classification.macro_f1;
  }
  out << " samples=" << r.samples;
  return out.str();
}

// Flags shared by train/eval/ablate/sweep: --config plus one --<key> per
// config key. Overrides are applied in key order after the file.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON run configuration");
    for (const std::string& key : run_config_keys()) {
      std::string dashed = key;
      std::replace(dashed.begin(), dashed.end(), '_', '-');
      std::string names = "--" + dashed;
      if (dashed != key) names += ",--" + key;
      app.add_option_function<std::string>(names, [this, key](const std::string& v) { overrides[key] = v; },
                                           "override config key '" + key + "'");
    }
  }

  RunConfig resolve() const {
    RunConfig cfg = default_run_config();
    if (!config_path.empty()) apply_file(cfg, config_path);
    for (const auto& [key, value] : overrides) apply_override(cfg, key, value);
    return cfg;
  }
};

struct RunInputs {
  RunConfig cfg;
  data::SampleSet data;
  std::optional<data::SampleSet> test;
  ModelConfig model;
};

RunInputs load_inputs(const ConfigFlags& flags) {
  RunInputs in;
  in.cfg = flags.resolve();
  if (in.cfg.data.empty()) throw ConfigError("no dataset given (--data FILE)");
  in.data = load_with_groups(in.cfg.data);
  if (!in.cfg.test_data.empty()) in.test = load_with_groups(in.cfg.test_data);
  in.model = training::fit_to_data(in.cfg.model, in.data);
  in.cfg.model = in.model;
  in.model.validate();
  in.cfg.train.validate();
  return in;
}

void write_run(const fs::path& dir, const RunConfig& cfg, const training::RunResult& result) {
  save_checkpoint((dir / "checkpoint.hsmg").string(), result.parameters);
  json metrics = metrics_object(result.valid);
  metrics["split"] = "valid";
  if (result.test) metrics["test"] = metrics_object(*result.test);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(dir / "metrics.csv", metrics::to_csv(result.valid));
  write_text(dir / "resolved-config.json", to_json(cfg));
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string dataset;
  std::string input;
  std::string output;
  std::string test_output;
  std::string subset = "FD001";
  std::size_t samples = 64;
  std::size_t sensors = 3;
  ConfigFlags flags;
};

void print_summary(const std::string& path, const data::SampleSet& set) {
  std::cout << "wrote " << path << ": S=" << set.size() << " N=" << set.sensors << " T=" << set.length
            << " C=" << set.channels << " task=" << task_name(set.task) << '\n';
}

void save_prepared(const std::string& path, const data::SampleSet& set) {
  data::save_dataset(path, set);
  if (!set.groups.empty() || !set.class_names.empty()) data::save_groups(path, set);
  print_summary(path, set);
}

int cmd_prepare(const PrepareArgs& args) {
  const RunConfig cfg = args.flags.resolve();
  if (args.dataset == "cmapss") {
    if (args.input.empty()) throw ConfigError("--input DIR is required for cmapss");
    const data::CmapssData d = data::load_cmapss(args.input, args.subset, cmapss_options(cfg));
    save_prepared(args.output, d.train);
    std::string test_path = args.test_output;
    if (test_path.empty()) {
      const fs::path out(args.output);
      test_path = (out.parent_path() / (out.stem().string() + "_test" + out.extension().string())).string();
    }
    save_prepared(test_path, d.test);
  } else if (args.dataset == "csv") {
    if (args.input.empty()) throw ConfigError("--input FILE is required for csv");
    save_prepared(args.output, data::load_csv(args.input, csv_schema(cfg)));
  } else if (args.dataset == "synthetic") {
    save_prepared(args.output, data::synthetic_linear_set(args.samples, args.sensors, cfg.window_length,
                                                          cfg.train.seed));
  } else {
    throw ConfigError("unknown dataset kind '" + args.dataset + "' (expected cmapss, csv or synthetic)");
  }
  return 0;
}

int cmd_train(const ConfigFlags& flags, const std::string& out_dir) {
  const RunInputs in = load_inputs(flags);
  const fs::path dir = ensure_dir(out_dir);
  const bool reg = in.data.task == Task::kRegression;
  const auto progress = [&](const metrics::EpochRecord& e) {
    std::cout << "epoch " << e.epoch << " train_loss=" << e.train_loss << (reg ? " valid_rmse=" : " valid_accuracy=")
              << e.valid_metric << std::endl;
  };
  const training::RunResult result =
      training::run_experiment(in.model, in.cfg.train, in.data, in.test ? &*in.test : nullptr, progress);
  write_run(dir, in.cfg, result);
  std::cout << headline_line("valid", result.valid) << " best_epoch=" << result.valid.best_epoch << '\n';
  if (result.test) std::cout << headline_line("test", *result.test) << '\n';
  return 0;
}

int cmd_eval(const ConfigFlags& flags, const std::string& checkpoint, const std::string& split,
             const std::string& out_dir) {
  const RunInputs in = load_inputs(flags);
  if (checkpoint.empty()) throw ConfigError("--checkpoint FILE is required");
  HsmgnnModel model(in.model, in.cfg.train.seed);
  const auto tensors = load_checkpoint(checkpoint);
  restore_parameters(model.parameters(), tensors);

  data::SampleSet subset;
  if (split == "all") {
    subset = in.data;
  } else if (split == "train" || split == "valid") {
    auto [train_part, valid_part] = data::carve_validation(in.data, in.cfg.train.valid_fraction, in.cfg.train.seed);
    subset = split == "train" ? std::move(train_part) : std::move(valid_part);
  } else if (split == "test") {
    if (!in.test) throw ConfigError("--split test needs test_data");
    subset = *in.test;
  } else {
    throw ConfigError("unknown split '" + split + "' (expected all, train, valid or test)");
  }
  const metrics::MetricsReport report = training::evaluate(model, subset);
  const fs::path dir = ensure_dir(out_dir);
  save_checkpoint((dir / "checkpoint.hsmg").string(), model.parameters());
  json metrics = metrics_object(report);
  metrics["split"] = split;
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(dir / "metrics.csv", metrics::to_csv(report));
  write_text(dir / "resolved-config.json", to_json(in.cfg));
  std::cout << headline_line(split, report) << '\n';
  return 0;
}

void write_study(const fs::path& dir, const std::string& name, const RunConfig& cfg,
                 const std::vector<training::StudyRow>& rows, const std::vector<RunConfig>& run_cfgs,
                 const json& summary) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string sub = rows[i].param == "variant"
                                ? rows[i].value + "-seed" + std::to_string(rows[i].result.seed)
                                : rows[i].param + "-" + std::to_string(i + 1);
    write_run(ensure_dir((dir / sub).string()), run_cfgs[i], rows[i].result);
  }
  if (rows.size() == 1) write_run(dir, run_cfgs[0], rows[0].result);
  const std::string csv = training::study_csv(rows);
  json report = json::parse(training::study_json(rows));
  report["summary"] = summary;
  write_text(dir / (name + ".csv"), csv);
  write_text(dir / (name + ".json"), report.dump(2) + "\n");
  if (rows.size() != 1) {
    write_text(dir / "metrics.csv", csv);
    write_text(dir / "metrics.json", report.dump(2) + "\n");
  }
  write_text(dir / "resolved-config.json", to_json(cfg));
}

double test_or_valid_headline(const training::RunResult& r) {
  return metrics::headline(r.test ? *r.test : r.valid);
}

int cmd_ablate(const ConfigFlags& flags, const std::string& variants_text, const std::string& seeds_text,
               std::size_t jobs, const std::string& out_dir) {
  const RunInputs in = load_inputs(flags);
  std::vector<Variant> variants;
  if (variants_text.empty()) {
    variants = {Variant::kComplete, Variant::kNoScs, Variant::kNoAdb, Variant::kNoFgcn};
  } else {
    for (const auto& v : split_list(variants_text)) variants.push_back(parse_variant(v));
  }
  std::vector<std::uint64_t> seeds;
  if (seeds_text.empty()) {
    seeds.push_back(in.cfg.train.seed);
  } else {
    for (const auto& s : split_list(seeds_text)) {
      RunConfig probe;
      apply_override(probe, "seed", s);
      seeds.push_back(probe.train.seed);
    }
  }
  const fs::path dir = ensure_dir(out_dir);
  const auto rows = training::run_ablation(variants, seeds, in.model, in.cfg.train, in.data,
                                           in.test ? &*in.test : nullptr, jobs);
  std::vector<RunConfig> run_cfgs;
  std::map<std::string, std::pair<double, std::size_t>> totals;
  for (const auto& row : rows) {
    RunConfig c = in.cfg;
    c.model = row.result.model;
    c.train.seed = row.result.seed;
    run_cfgs.push_back(c);
    auto& t = totals[row.value];
    t.first += test_or_valid_headline(row.result);
    ++t.second;
  }
  json summary;
  summary["metric"] = std::string(in.test ? "test_" : "valid_") + (in.data.task == Task::kRegression ? "rmse" : "accuracy");
  for (Variant v : variants) {
    const auto& t = totals[std::string(variant_name(v))];
    summary["mean"][std::string(variant_name(v))] = t.first / static_cast<double>(t.second);
  }
  write_study(dir, "ablation", in.cfg, rows, run_cfgs, summary);
  for (Variant v : variants) {
    std::cout << variant_name(v) << " mean " << summary["metric"].get<std::string>() << "="
              << summary["mean"][std::string(variant_name(v))].get<double>() << '\n';
  }
  return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& param_text, const std::string& values_text,
              std::size_t jobs, const std::string& out_dir) {
  const RunInputs in = load_inputs(flags);
  const training::SweepParam param = training::parse_sweep_param(param_text);
  const auto values = split_list(values_text);
  const auto points = training::sweep_points(param, values, in.model);
  const fs::path dir = ensure_dir(out_dir);
  const auto rows = training::run_sweep(param, points, in.cfg.train, in.data, in.test ? &*in.test : nullptr, jobs);
  std::vector<RunConfig> run_cfgs;
  json summary;
  summary["param"] = param_text;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    RunConfig c = in.cfg;
    c.model = points[i].model;
    run_cfgs.push_back(c);
    std::cout << param_text << "=" << rows[i].value << " " << headline_line(rows[i].result.test ? "test" : "valid",
                                                                          rows[i].result.test ? *rows[i].result.test
                                                                                              : rows[i].result.valid)
              << '\n';
  }
  write_study(dir, "sweep", in.cfg, rows, run_cfgs, summary);
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Graph neural network over SPD covariance features for multivariate time series"};
  app.require_subcommand(1);

  PrepareArgs prep;
  CLI::App* prepare = app.add_subcommand("prepare", "convert raw data into the canonical dataset file");
  prepare->add_option("--dataset", prep.dataset, "cmapss, csv or synthetic")->required();
  prepare->add_option("--input", prep.input, "C-MAPSS directory or CSV file");
  prepare->add_option("--output", prep.output, "canonical dataset file")->required();
  prepare->add_option("--test-output", prep.test_output, "C-MAPSS test windows (default <output>_test)");
  prepare->add_option("--subset", prep.subset, "C-MAPSS subset, FD001..FD004");
  prepare->add_option("--samples", prep.samples, "synthetic sample count");
  prepare->add_option("--sensors", prep.sensors, "synthetic sensor count");
  prep.flags.attach(*prepare);

  ConfigFlags train_flags, eval_flags, ablate_flags, sweep_flags;
  std::string train_out = "run", eval_out = "eval", ablate_out = "ablation", sweep_out = "sweep";

  CLI::App* train = app.add_subcommand("train", "train one model");
  train_flags.attach(*train);
  train->add_option("--out", train_out, "output directory");

  std::string checkpoint, split = "all";
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_flags.attach(*eval);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--split", split, "all, train, valid (seeded carve-out) or test");
  eval->add_option("--out", eval_out, "output directory");

  std::string variants, seeds;
  std::size_t ablate_jobs = 1, sweep_jobs = 1;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "train the complete model and its ablations");
  ablate_flags.attach(*ablate_cmd);
  ablate_cmd->add_option("--variants", variants, "comma list (default: all four)");
  ablate_cmd->add_option("--seeds", seeds, "comma list of seeds (default: the config seed)");
  ablate_cmd->add_option("--jobs", ablate_jobs, "parallel runs");
  ablate_cmd->add_option("--out", ablate_out, "output directory");

  std::string param, values;
  CLI::App* sweep = app.add_subcommand("sweep", "one training run per hyperparameter value");
  sweep_flags.attach(*sweep);
  sweep->add_option("--param", param, "delta, m_d, m_q, fusion_weights or m_d_m_q")->required();
  sweep->add_option("--values", values, "comma list; pairs as a:b")->required();
  sweep->add_option("--jobs", sweep_jobs, "parallel runs");
  sweep->add_option("--out", sweep_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*prepare) return cmd_prepare(prep);
    if (*train) return cmd_train(train_flags, train_out);
    if (*eval) return cmd_eval(eval_flags, checkpoint, split, eval_out);
    if (*ablate_cmd) return cmd_ablate(ablate_flags, variants, seeds, ablate_jobs, ablate_out);
    if (*sweep) return cmd_sweep(sweep_flags, param, values, sweep_jobs, sweep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 2;
}

}  // namespace hsmgnn
