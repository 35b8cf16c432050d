#include "hakan/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

namespace hakan {

// ---- losses and metrics ----------------------------------------------------

Tensor mse_loss(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("mse_loss: prediction " + to_string(pred.shape()) + " vs truth " + to_string(truth.shape()));
  }
  return mean(square(sub(pred, truth)));
}

namespace {
void require_same(const RowMatrix& a, const RowMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}
}  // namespace

double mse_metric(const RowMatrix& pred, const RowMatrix& truth) {
  require_same(pred, truth, "mse");
  return (pred - truth).array().square().mean();
}

double mae_metric(const RowMatrix& pred, const RowMatrix& truth) {
  require_same(pred, truth, "mae");
  return (pred - truth).array().abs().mean();
}

// ---- Adam ------------------------------------------------------------------

AdamState make_adam_state(const std::vector<Tensor>& params, const AdamOptions& options) {
  AdamState state;
  state.options = options;
  for (const auto& p : params) {
    state.m.emplace_back(p.numel(), 0.0);
    state.v.emplace_back(p.numel(), 0.0);
  }
  return state;
}

void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.size() != params.size()) throw ContractError("adam_step: state does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw ContractError("adam_step: parameter " + std::to_string(i) + " has no gradient");
    if (state.m[i].size() != params[i].numel()) throw ContractError("adam_step: moment buffer shape mismatch");
  }
  const auto& o = state.options;
  state.t += 1;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i].mutable_data();
    auto g = params[i].grad();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = o.beta1 * m[j] + (1.0 - o.beta1) * g[j];
      v[j] = o.beta2 * v[j] + (1.0 - o.beta2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      theta[j] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
    }
  }
}

double clip_grad_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      if (!p.has_grad()) continue;
      for (double& g : p.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

// ---- training loop ---------------------------------------------------------

void TrainSpec::validate() const {
  if (max_epochs == 0) throw ConfigError("train.max_epochs must be positive");
  if (patience > max_epochs) throw ConfigError("train.patience must not exceed train.max_epochs");
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (eval_batch_size == 0) throw ConfigError("train.eval_batch_size must be positive");
  if (micro_batch == 0) throw ConfigError("train.micro_batch must be positive");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm must be non-negative");
}

bool EarlyStopping::update(double val_loss) {
  ++epoch_;
  if (best_epoch_ == 0 || val_loss < best_) {
    best_ = val_loss;
    best_epoch_ = epoch_;
    bad_epochs_ = 0;
    return true;
  }
  ++bad_epochs_;
  return false;
}

namespace {

struct SampleRef {
  std::size_t origin;
  std::size_t channel;
};

std::vector<SampleRef> sample_refs(const RowMatrix& values, IndexRange segment, std::size_t lookback,
                                   std::size_t horizon) {
  std::vector<SampleRef> refs;
  const auto origins = window_origins(segment, lookback, horizon);
  const auto channels = static_cast<std::size_t>(values.cols());
  refs.reserve(origins.size() * channels);
  for (auto o : origins) {
    for (std::size_t c = 0; c < channels; ++c) refs.push_back({o, c});
  }
  return refs;
}

void fill_batch(const RowMatrix& values, std::span<const SampleRef> refs, std::size_t lookback, std::size_t horizon,
                RowMatrix& series, RowMatrix& targets) {
  const auto b = static_cast<Eigen::Index>(refs.size());
  series.resize(b, static_cast<Eigen::Index>(lookback));
  targets.resize(b, static_cast<Eigen::Index>(horizon));
  for (Eigen::Index i = 0; i < b; ++i) {
    const auto& r = refs[static_cast<std::size_t>(i)];
    const auto c = static_cast<Eigen::Index>(r.channel);
    series.row(i) = values.col(c).segment(static_cast<Eigen::Index>(r.origin), static_cast<Eigen::Index>(lookback));
    targets.row(i) =
        values.col(c).segment(static_cast<Eigen::Index>(r.origin + lookback), static_cast<Eigen::Index>(horizon));
  }
}

std::vector<Tensor> parameter_tensors(const HaKanModel& model) {
  std::vector<Tensor> out;
  for (auto& p : model.parameters()) out.push_back(p.tensor);
  return out;
}

}  // namespace

EvalResult evaluate(const HaKanModel& model, const RowMatrix& values, IndexRange segment,
                    std::size_t eval_batch_size) {
  const auto& c = model.config();
  const auto refs = sample_refs(values, segment, c.lookback, c.horizon);
  EvalResult out;
  if (refs.empty()) return out;
  double sq = 0.0;
  double ab = 0.0;
  RowMatrix series;
  RowMatrix targets;
  for (std::size_t start = 0; start < refs.size(); start += eval_batch_size) {
    const std::size_t count = std::min(eval_batch_size, refs.size() - start);
    fill_batch(values, std::span(refs).subspan(start, count), c.lookback, c.horizon, series, targets);
    const Tensor pred = model.forward_batch(series);
    const RowMatrix diff = pred.matrix() - targets;
    sq += diff.array().square().sum();
    ab += diff.array().abs().sum();
  }
  const double n = static_cast<double>(refs.size() * c.horizon);
  out.mse = sq / n;
  out.mae = ab / n;
  out.windows = refs.size() / static_cast<std::size_t>(values.cols());
  return out;
}

TrainResult train(const HaKanModel& initial, const ForecastData& data, const TrainSpec& spec,
                  const EpochCallback& on_epoch) {
  spec.validate();
  const auto& c = initial.config();
  if (static_cast<std::size_t>(data.values.cols()) != c.channels) {
    throw ConfigError("model expects " + std::to_string(c.channels) + " channels but dataset '" + data.name +
                      "' has " + std::to_string(data.values.cols()));
  }
  auto train_refs = sample_refs(data.values, data.ranges.train, c.lookback, c.horizon);
  if (train_refs.empty()) throw ConfigError("training split of '" + data.name + "' yields no windows");
  if (window_origins(data.ranges.val, c.lookback, c.horizon).empty()) {
    throw ConfigError("validation split of '" + data.name + "' yields no windows");
  }
  if (window_origins(data.ranges.test, c.lookback, c.horizon).empty()) {
    throw ConfigError("test split of '" + data.name + "' yields no windows");
  }

  const auto started = std::chrono::steady_clock::now();
  HaKanModel model = initial.clone();
  std::vector<Tensor> params = parameter_tensors(model);
  AdamState adam = make_adam_state(params, AdamOptions{spec.lr});
  std::mt19937_64 rng(spec.seed);
  EarlyStopping stopper(spec.patience);
  HaKanModel best = model.clone();

  TrainResult result{best.clone(), {}, {}, 0};
  RowMatrix series;
  RowMatrix targets;
  for (std::size_t epoch = 1; epoch <= spec.max_epochs; ++epoch) {
    std::shuffle(train_refs.begin(), train_refs.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < train_refs.size(); start += spec.batch_size) {
      if (spec.max_batches_per_epoch && batches >= spec.max_batches_per_epoch) break;
      const std::size_t count = std::min(spec.batch_size, train_refs.size() - start);
      double batch_loss = 0.0;
      for (std::size_t sub = 0; sub < count; sub += spec.micro_batch) {
        const std::size_t part = std::min(spec.micro_batch, count - sub);
        fill_batch(data.values, std::span(train_refs).subspan(start + sub, part), c.lookback, c.horizon, series,
                   targets);
        Tape tape;
        const Tensor loss = mul_scalar(mse_loss(model.forward_batch(series), Tensor::from_matrix(targets)),
                                       static_cast<double>(part) / static_cast<double>(count));
        batch_loss += loss.item();
        backward(loss);
      }
      loss_sum += batch_loss;
      if (spec.clip_norm > 0.0) clip_grad_norm(params, spec.clip_norm);
      adam_step(params, adam);
      for (auto& p : params) p.zero_grad();
      ++batches;
    }

    EpochLog log;
    log.epoch = epoch;
    log.train_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    log.val_mse = evaluate(model, data.values, data.ranges.val, spec.eval_batch_size).mse;
    log.improved = stopper.update(log.val_mse);
    if (log.improved) best.assign(model);
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
    if (stopper.stop()) break;
  }

  const EvalResult test = evaluate(best, data.values, data.ranges.test, spec.eval_batch_size);
  result.model = std::move(best);
  result.best_epoch = stopper.best_epoch();
  result.record.dataset = data.name;
  result.record.horizon = c.horizon;
  result.record.seed = spec.seed;
  result.record.mse = test.mse;
  result.record.mae = test.mae;
  result.record.epochs = stopper.epochs_seen();
  result.record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ---- gradient check --------------------------------------------------------

GradCheckReport grad_check(const HaKanModel& model, const RowMatrix& series, const RowMatrix& targets,
                           const GradCheckOptions& options) {
  HaKanModel work = model.clone();
  auto params = work.parameters();
  for (auto& p : params) p.tensor.clear_grad();
  const Tensor truth = Tensor::from_matrix(targets);
  {
    Tape tape;
    backward(mse_loss(work.forward_batch(series), truth));
  }
  if (options.tamper) options.tamper(params);

  auto loss_at = [&]() { return mse_metric(work.forward_batch(series).matrix(), targets); };

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (auto& p : params) {
    GradCheckGroup group;
    group.name = p.name;
    const std::vector<double> analytic = p.tensor.has_grad()
                                             ? std::vector<double>(p.tensor.grad().begin(), p.tensor.grad().end())
                                             : std::vector<double>(p.tensor.numel(), 0.0);
    auto theta = p.tensor.mutable_data();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      const double saved = theta[j];
      theta[j] = saved + options.step;
      const double up = loss_at();
      theta[j] = saved - options.step;
      const double down = loss_at();
      theta[j] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double rel = std::fabs(analytic[j] - numeric) / std::max(1.0, std::fabs(analytic[j]));
      group.max_rel_error = std::max(group.max_rel_error, rel);
      ++group.checked;
    }
    report.worst = std::max(report.worst, group.max_rel_error);
    report.groups.push_back(group);
  }
  report.passed = report.worst < options.tolerance;
  return report;
}

ModelConfig tiny_gradcheck_config(LayerMode mode, std::uint64_t seed) {
  ModelConfig c;
  c.lookback = 16;
  c.horizon = 4;
  c.channels = 2;
  c.patch_len = 4;
  c.stride = 4;
  c.d_model = 4;
  c.blocks = 2;
  c.bottleneck = 6;
  c.mode = mode;
  c.seed = seed;
  return c;
}

GradCheckReport run_tiny_gradcheck(LayerMode mode, const GradCheckOptions& options) {
  const ModelConfig config = tiny_gradcheck_config(mode);
  const HaKanModel model(config);
  // Two smooth channels, two windows each.
  const std::size_t len = config.lookback + config.horizon;
  RowMatrix series(4, static_cast<Eigen::Index>(config.lookback));
  RowMatrix targets(4, static_cast<Eigen::Index>(config.horizon));
  for (Eigen::Index row = 0; row < 4; ++row) {
    const double channel = static_cast<double>(row % 2);
    const double offset = static_cast<double>(row / 2) * 3.0;
    for (std::size_t t = 0; t < len; ++t) {
      const double time = static_cast<double>(t) + offset;
      const double v = std::sin(0.4 * time + channel) + 0.05 * channel * time + 0.3 * std::cos(1.3 * time);
      if (t < config.lookback) {
        series(row, static_cast<Eigen::Index>(t)) = v;
      } else {
        targets(row, static_cast<Eigen::Index>(t - config.lookback)) = v;
      }
    }
  }
  return grad_check(model, series, targets, options);
}

// ---- reporting -------------------------------------------------------------

AggregateReport aggregate_report(const std::vector<MetricRecord>& records) {
  AggregateReport report;
  // Preserve first-appearance order of datasets and horizons.
  std::vector<std::pair<std::string, std::size_t>> keys;
  std::map<std::pair<std::string, std::size_t>, std::vector<const MetricRecord*>> groups;
  for (const auto& r : records) {
    auto key = std::make_pair(r.dataset, r.horizon);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }

  auto mean_std = [](const std::vector<double>& xs) {
    const double n = static_cast<double>(xs.size());
    const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double var = 0.0;
    for (double x : xs) var += (x - m) * (x - m);
    const double sd = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return std::make_pair(m, sd);
  };

  std::vector<std::string> datasets;
  std::map<std::string, std::vector<const SeedSummary*>> by_dataset;
  report.per_horizon.reserve(keys.size());
  for (const auto& key : keys) {
    const auto& runs = groups[key];
    std::vector<double> mses;
    std::vector<double> maes;
    for (const auto* r : runs) {
      mses.push_back(r->mse);
      maes.push_back(r->mae);
    }
    SeedSummary s;
    s.dataset = key.first;
    s.horizon = key.second;
    s.runs = runs.size();
    std::tie(s.mse_mean, s.mse_std) = mean_std(mses);
    std::tie(s.mae_mean, s.mae_std) = mean_std(maes);
    report.per_horizon.push_back(s);
  }
  for (const auto& s : report.per_horizon) {
    if (!by_dataset.count(s.dataset)) datasets.push_back(s.dataset);
    by_dataset[s.dataset].push_back(&s);
  }
  for (const auto& name : datasets) {
    DatasetAverage avg;
    avg.dataset = name;
    for (const auto* s : by_dataset[name]) {
      avg.mse += s->mse_mean;
      avg.mae += s->mae_mean;
    }
    avg.mse /= static_cast<double>(by_dataset[name].size());
    avg.mae /= static_cast<double>(by_dataset[name].size());
    report.per_dataset.push_back(avg);
  }
  for (const auto& d : report.per_dataset) {
    report.mse += d.mse;
    report.mae += d.mae;
  }
  if (!report.per_dataset.empty()) {
    report.mse /= static_cast<double>(report.per_dataset.size());
    report.mae /= static_cast<double>(report.per_dataset.size());
  }
  return report;
}

std::string format_seed_table(const AggregateReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  std::string current;
  for (const auto& s : report.per_horizon) {
    if (s.dataset != current) {
      current = s.dataset;
      os << std::left << std::setw(8) << current << "  " << std::setw(18) << "MSE" << "  " << "MAE" << '\n';
    }
    os << std::left << std::setw(8) << s.horizon << "  " << s.mse_mean << " ± " << s.mse_std << "  " << s.mae_mean
       << " ± " << s.mae_std << '\n';
  }
  return os.str();
}

}  // namespace hakan
