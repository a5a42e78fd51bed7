#include "hsmgnn/training.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hsmgnn/adam.hpp"
#include "hsmgnn/error.hpp"
#include "hsmgnn/random.hpp"

namespace hsmgnn::training {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (patience == 0) throw ConfigError("patience must be >= 1");
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw ConfigError("valid_fraction must lie in (0, 1)");
  }
}

ModelConfig fit_to_data(ModelConfig base, const data::SampleSet& set) {
  base.num_sensors = set.sensors;
  base.series_length = set.length;
  base.channels = set.channels;
  base.fusion.task = set.task;
  base.fusion.num_classes = set.num_classes();
  return base;
}

Tensor make_batch(const data::SampleSet& set, std::span<const std::size_t> indices) {
  std::vector<double> values;
  values.reserve(indices.size() * set.window_size());
  for (std::size_t i : indices) {
    const auto w = set.window(i);
    values.insert(values.end(), w.begin(), w.end());
  }
  return Tensor::from_data({indices.size(), set.sensors, set.length, set.channels}, std::move(values));
}

namespace {

void check_compatible(const HsmgnnModel& model, const data::SampleSet& set) {
  const auto& c = model.config();
  if (c.num_sensors != set.sensors || c.series_length != set.length || c.channels != set.channels) {
    throw ConfigError("data windows are " + std::to_string(set.sensors) + "x" +
                      std::to_string(set.length) + "x" + std::to_string(set.channels) +
                      " but the model expects " + std::to_string(c.num_sensors) + "x" +
                      std::to_string(c.series_length) + "x" + std::to_string(c.channels));
  }
  if (c.fusion.task != set.task) {
    throw ConfigError("data task is " + std::string(task_name(set.task)) + " but the model is " +
                      std::string(task_name(c.fusion.task)));
  }
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

std::vector<int> argmax_rows(std::span<const double> outputs, std::size_t width) {
  std::vector<int> out(outputs.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = outputs.subspan(i * width, width);
    out[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

// Larger is better for accuracy, smaller for RMSE and loss.
bool improves(double candidate, double best, bool maximize) {
  return maximize ? candidate > best : candidate < best;
}

}  // namespace

std::vector<double> predict(const HsmgnnModel& model, const data::SampleSet& set, std::size_t batch_size) {
  check_compatible(model, set);
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(set.size() * model.config().fusion.output_width());
  const auto all = iota(set.size());
  for (std::size_t start = 0; start < set.size(); start += batch_size) {
    const std::size_t len = std::min(batch_size, set.size() - start);
    const Tensor y = model.forward(make_batch(set, std::span(all).subspan(start, len)));
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

metrics::MetricsReport evaluate(const HsmgnnModel& model, const data::SampleSet& set,
                                std::size_t batch_size) {
  if (set.empty()) throw ContractError("evaluate: empty data set");
  const std::vector<double> outputs = predict(model, set, batch_size);
  metrics::MetricsReport report;
  report.task = set.task;
  report.samples = set.size();
  if (set.task == Task::kRegression) {
    report.regression = metrics::regression(outputs, set.labels);
  } else {
    const auto pred = argmax_rows(outputs, model.config().fusion.output_width());
    std::vector<int> truth(set.size());
    for (std::size_t i = 0; i < truth.size(); ++i) truth[i] = static_cast<int>(std::lround(set.labels[i]));
    report.classification = metrics::classification(pred, truth);
  }
  return report;
}

metrics::MetricsReport train(HsmgnnModel& model, const TrainConfig& cfg, const data::SampleSet& train_set,
                             const data::SampleSet& valid, const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ContractError("train: empty training set");
  check_compatible(model, train_set);
  if (!valid.empty()) check_compatible(model, valid);

  const auto start_time = std::chrono::steady_clock::now();
  const Task task = train_set.task;
  const bool maximize = task == Task::kClassification && !valid.empty();
  ParameterSet& params = model.parameters();
  AdamState adam(AdamOptions{.learning_rate = cfg.learning_rate});
  Rng order_rng(cfg.seed ^ 0x9E3779B97F4A7C15ull);

  metrics::MetricsReport report;
  report.task = task;
  std::vector<std::size_t> order = iota(train_set.size());
  std::vector<std::vector<double>> best_values = params.values();
  double best = maximize ? -INFINITY : INFINITY;
  std::size_t stale = 0;
  std::size_t steps = 0;
  bool step_cap_hit = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs && !step_cap_hit; ++epoch) {
    order_rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const auto idx = std::span(order).subspan(start, len);
      std::vector<double> targets(len);
      for (std::size_t i = 0; i < len; ++i) targets[i] = train_set.labels[idx[i]];

      params.zero_grads();
      const Tensor loss = fusion::loss(model.forward(make_batch(train_set, idx)), targets, task);
      const double value = loss.item();
      if (!std::isfinite(value)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             ", step " + std::to_string(steps + 1));
      }
      loss.backward();
      try {
        adam.step(params);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")");
      }
      ++steps;
      loss_sum += value * static_cast<double>(len);
      seen += len;
      if (cfg.max_steps != 0 && steps >= cfg.max_steps) {
        step_cap_hit = true;
        break;
      }
    }

    metrics::EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(seen);
    record.valid_metric = valid.empty() ? record.train_loss : metrics::headline(evaluate(model, valid));
    report.curve.push_back(record);
    if (on_epoch) on_epoch(record);

    if (improves(record.valid_metric, best, maximize)) {
      best = record.valid_metric;
      best_values = params.values();
      report.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }

  params.assign_values(best_values);
  const metrics::MetricsReport final_metrics = evaluate(model, valid.empty() ? train_set : valid);
  report.samples = final_metrics.samples;
  report.regression = final_metrics.regression;
  report.classification = final_metrics.classification;
  report.steps = steps;
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return report;
}

RunResult run_experiment(const ModelConfig& model_cfg, const TrainConfig& cfg, const data::SampleSet& data,
                         const data::SampleSet* test, const EpochCallback& on_epoch) {
  cfg.validate();
  auto [train_part, valid_part] = data::carve_validation(data, cfg.valid_fraction, cfg.seed);
  HsmgnnModel model(model_cfg, cfg.seed);
  RunResult result;
  result.model = model_cfg;
  result.seed = cfg.seed;
  result.valid = train(model, cfg, train_part, valid_part, on_epoch);
  if (test != nullptr) result.test = evaluate(model, *test);
  result.parameters = model.parameters();
  return result;
}

// ---------------------------------------------------------------------------

namespace {

struct Job {
  std::string param;
  std::string value;
  ModelConfig model;
  TrainConfig train;
};

std::vector<StudyRow> run_jobs(const std::vector<Job>& jobs, const data::SampleSet& data,
                               const data::SampleSet* test, std::size_t workers) {
  std::vector<std::optional<RunResult>> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_experiment(jobs[i].model, jobs[i].train, data, test);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(jobs.size(), 1));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  // The first failing job in collation order decides the error.
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<StudyRow> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    rows.push_back({jobs[i].param, jobs[i].value, std::move(*results[i])});
  }
  return rows;
}

double parse_real(const std::string& text, std::string_view param) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw ConfigError("sweep " + std::string(param) + ": '" + text + "' is not a number");
  }
  return v;
}

std::size_t parse_count(const std::string& text, std::string_view param) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || v == 0) {
    throw ConfigError("sweep " + std::string(param) + ": '" + text + "' is not a positive integer");
  }
  return v;
}

std::pair<std::string, std::string> parse_pair(const std::string& text, std::string_view param) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || text.find(':', colon + 1) != std::string::npos) {
    throw ConfigError("sweep " + std::string(param) + ": expected a pair 'a:b', got '" + text + "'");
  }
  return {text.substr(0, colon), text.substr(colon + 1)};
}

}  // namespace

std::vector<StudyRow> run_ablation(std::span<const Variant> variants, std::span<const std::uint64_t> seeds,
                                   const ModelConfig& base, const TrainConfig& cfg,
                                   const data::SampleSet& data, const data::SampleSet* test,
                                   std::size_t jobs) {
  cfg.validate();
  if (variants.empty() || seeds.empty()) throw ConfigError("ablation needs at least one variant and seed");
  std::vector<Job> work;
  for (Variant v : variants) {
    const ModelConfig model = ablate(v, base);
    model.validate();
    for (std::uint64_t seed : seeds) {
      TrainConfig t = cfg;
      t.seed = seed;
      work.push_back({"variant", std::string(variant_name(v)), model, t});
    }
  }
  return run_jobs(work, data, test, jobs);
}

std::string_view sweep_param_name(SweepParam p) {
  switch (p) {
    case SweepParam::kDelta: return "delta";
    case SweepParam::kMd: return "m_d";
    case SweepParam::kMq: return "m_q";
    case SweepParam::kFusionWeights: return "fusion_weights";
    case SweepParam::kMdMq: return "m_d_m_q";
  }
  return "delta";
}

SweepParam parse_sweep_param(std::string_view name) {
  for (SweepParam p : {SweepParam::kDelta, SweepParam::kMd, SweepParam::kMq, SweepParam::kFusionWeights,
                       SweepParam::kMdMq}) {
    if (sweep_param_name(p) == name) return p;
  }
  throw ConfigError("unknown sweep parameter '" + std::string(name) +
                    "' (expected delta, m_d, m_q, fusion_weights or m_d_m_q)");
}

std::vector<SweepPoint> sweep_points(SweepParam param, std::span<const std::string> values,
                                     const ModelConfig& base) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::string_view name = sweep_param_name(param);
  std::vector<SweepPoint> points;
  for (const std::string& text : values) {
    ModelConfig m = base;
    switch (param) {
      case SweepParam::kDelta:
        m.scs.delta = parse_real(text, name);
        break;
      case SweepParam::kMd:
        m.ndv_hidden = parse_count(text, name);
        break;
      case SweepParam::kMq:
        m.memory_dim = parse_count(text, name);
        break;
      case SweepParam::kFusionWeights: {
        const auto [ws, we] = parse_pair(text, name);
        m.fusion.weight_spd = parse_real(ws, name);
        m.fusion.weight_euclid = parse_real(we, name);
        break;
      }
      case SweepParam::kMdMq: {
        const auto [md, mq] = parse_pair(text, name);
        m.ndv_hidden = parse_count(md, name);
        m.memory_dim = parse_count(mq, name);
        break;
      }
    }
    try {
      m.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("sweep " + std::string(name) + " value '" + text + "': " + e.what());
    }
    points.push_back({text, std::move(m)});
  }
  return points;
}

std::vector<StudyRow> run_sweep(SweepParam param, std::span<const SweepPoint> points,
                                const TrainConfig& cfg, const data::SampleSet& data,
                                const data::SampleSet* test, std::size_t jobs) {
  cfg.validate();
  std::vector<Job> work;
  for (const auto& p : points) work.push_back({std::string(sweep_param_name(param)), p.value, p.model, cfg});
  return run_jobs(work, data, test, jobs);
}

namespace {

void append_metrics(std::ostringstream& out, const metrics::MetricsReport& r) {
  if (r.task == Task::kRegression) {
    out << ',' << r.regression.mae << ',' << r.regression.mse << ',' << r.regression.rmse;
  } else {
    out << ',' << r.classification.accuracy << ',' << r.classification.macro_f1;
  }
}

nlohmann::ordered_json metrics_object(const metrics::MetricsReport& r) {
  nlohmann::ordered_json j;
  j["samples"] = r.samples;
  if (r.task == Task::kRegression) {
    j["mae"] = r.regression.mae;
    j["mse"] = r.regression.mse;
    j["rmse"] = r.regression.rmse;
  } else {
    j["accuracy"] = r.classification.accuracy;
    j["macro_f1"] = r.classification.macro_f1;
  }
  return j;
}

}  // namespace

std::string study_csv(std::span<const StudyRow> rows) {
  std::ostringstream out;
  out.precision(17);
  const bool reg = rows.empty() || rows.front().result.valid.task == Task::kRegression;
  const bool has_test = !rows.empty() && rows.front().result.test.has_value();
  const auto cols = [&](const char* prefix) {
    if (reg) {
      out << ',' << prefix << "_mae," << prefix << "_mse," << prefix << "_rmse";
    } else {
      out << ',' << prefix << "_accuracy," << prefix << "_macro_f1";
    }
  };
  out << "param,value,seed,best_epoch,epochs_run";
  cols("valid");
  if (has_test) cols("test");
  out << '\n';
  for (const auto& row : rows) {
    const auto& r = row.result;
    out << row.param << ',' << row.value << ',' << r.seed << ',' << r.valid.best_epoch << ','
        << r.valid.curve.size();
    append_metrics(out, r.valid);
    if (has_test) append_metrics(out, *r.test);
    out << '\n';
  }
  return out.str();
}

std::string study_json(std::span<const StudyRow> rows) {
  auto runs = nlohmann::ordered_json::array();
  for (const auto& row : rows) {
    nlohmann::ordered_json j;
    j["param"] = row.param;
    j["value"] = row.value;
    j["seed"] = row.result.seed;
    j["best_epoch"] = row.result.valid.best_epoch;
    j["epochs_run"] = row.result.valid.curve.size();
    j["wall_clock_seconds"] = row.result.valid.wall_clock_seconds;
    j["valid"] = metrics_object(row.result.valid);
    if (row.result.test) j["test"] = metrics_object(*row.result.test);
    runs.push_back(std::move(j));
  }
  return nlohmann::ordered_json{{"runs", runs}}.dump(2) + "\n";
}

}  // namespace hsmgnn::training
