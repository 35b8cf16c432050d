#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hakan/data.hpp"
#include "hakan/model.hpp"
#include "hakan/tensor.hpp"

namespace hakan {

// ---- losses and metrics ----------------------------------------------------

// Mean of squared differences over every element, recorded on the tape.
Tensor mse_loss(const Tensor& pred, const Tensor& truth);

double mse_metric(const RowMatrix& pred, const RowMatrix& truth);
double mae_metric(const RowMatrix& pred, const RowMatrix& truth);

// ---- Adam ------------------------------------------------------------------

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamOptions options;
  std::size_t t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

AdamState make_adam_state(const std::vector<Tensor>& params, const AdamOptions& options);

// One bias-corrected Adam update using each parameter's gradient buffer.
// Throws ContractError when a parameter has no gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state);

// Rescales gradients so their global L2 norm is at most max_norm; returns the
// norm before clipping.
double clip_grad_norm(std::vector<Tensor>& params, double max_norm);

// ---- training loop ---------------------------------------------------------

struct TrainSpec {
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  std::uint64_t seed = 2021;
  double clip_norm = 0.0;  // 0 disables clipping
  bool deterministic = true;
  std::size_t eval_batch_size = 64;
  // Gradients of a batch are accumulated over chunks of at most this many
  // rows; the update equals the full-batch one up to summation order.
  std::size_t micro_batch = 64;
  std::size_t max_batches_per_epoch = 0;  // 0 = full pass over the training windows

  void validate() const;
};

struct MetricRecord {
  std::string dataset;
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double mae = 0.0;
  std::size_t epochs = 0;  // epoch at which training stopped
  double seconds = 0.0;
};

// Tracks the best validation loss; stop() turns true after `patience`
// consecutive epochs without improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  // Returns true when `val_loss` is a new best.
  bool update(double val_loss);
  bool stop() const { return bad_epochs_ >= patience_; }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based
  std::size_t epochs_seen() const { return epoch_; }

 private:
  std::size_t patience_;
  double best_ = 0.0;
  std::size_t best_epoch_ = 0;
  std::size_t epoch_ = 0;
  std::size_t bad_epochs_ = 0;
};

// Standardized values plus split ranges; windows are built from them.
struct ForecastData {
  std::string name;
  RowMatrix values;
  SplitRanges ranges;
};

struct EvalResult {
  double mse = 0.0;
  double mae = 0.0;
  std::size_t windows = 0;
};

// Forecasts every (window, channel) of the segment and averages the errors.
EvalResult evaluate(const HaKanModel& model, const RowMatrix& values, IndexRange segment,
                    std::size_t eval_batch_size = 64);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  bool improved = false;
};

struct TrainResult {
  HaKanModel model;  // best-validation snapshot
  MetricRecord record;
  std::vector<EpochLog> history;
  std::size_t best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

TrainResult train(const HaKanModel& initial, const ForecastData& data, const TrainSpec& spec,
                  const EpochCallback& on_epoch = {});

// ---- gradient check --------------------------------------------------------

struct GradCheckGroup {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // Applied to the tape gradients before comparison (negative controls).
  std::function<void(std::vector<NamedTensor>&)> tamper;
};

// Compares tape gradients of mse_loss(forward_batch(series), targets) with
// central differences for every parameter scalar. Relative error is
// |analytic - numeric| / max(1, |analytic|).
GradCheckReport grad_check(const HaKanModel& model, const RowMatrix& series, const RowMatrix& targets,
                           const GradCheckOptions& options);

// A small configuration (< 5,000 parameters) for gradient checks.
ModelConfig tiny_gradcheck_config(LayerMode mode, std::uint64_t seed = 7);

// Builds the tiny model and a smooth two-channel toy batch, then runs
// grad_check on it.
GradCheckReport run_tiny_gradcheck(LayerMode mode, const GradCheckOptions& options);

// ---- reporting -------------------------------------------------------------

struct SeedSummary {
  std::string dataset;
  std::size_t horizon = 0;
  std::size_t runs = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
};

struct DatasetAverage {
  std::string dataset;
  double mse = 0.0;
  double mae = 0.0;
};

struct AggregateReport {
  std::vector<SeedSummary> per_horizon;  // mean +- std over seeds
  std::vector<DatasetAverage> per_dataset;  // mean over horizons
  double mse = 0.0;                          // mean over datasets
  double mae = 0.0;
};

// Seed runs are averaged per (dataset, horizon), those per dataset, and the
// datasets overall. Standard deviations are sample (n - 1) deviations.
AggregateReport aggregate_report(const std::vector<MetricRecord>& records);

// "horizon  mse_mean +- std  mae_mean +- std" rows per dataset.
std::string format_seed_table(const AggregateReport& report);

}  // namespace hakan
