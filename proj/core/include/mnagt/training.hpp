#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnagt/dataset.hpp"
#include "mnagt/model.hpp"

namespace mnagt {

enum class LrSchedule { WarmupConstant, WarmupCosine };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& s);

struct TrainConfig {
  double lr = 2e-4;
  double weight_decay = 1e-5;
  double dropout = 0.2;
  std::size_t epochs = 100;
  std::size_t batch_size = 256;
  /// Negative: 10% of the total number of optimizer steps.
  long warmup_steps = -1;
  LrSchedule schedule = LrSchedule::WarmupConstant;
  std::vector<std::uint64_t> seeds{0};
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Global-norm gradient clipping threshold; 0 disables.
  double clip_norm = 1.0;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  /// When false, metric records carry seconds = 0 so streams are
  /// byte-comparable across runs.
  bool record_time = true;

  void validate() const;
};

struct AdamWOptions {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-5;
};

template <class T>
struct AdamState {
  std::vector<Tensor<T>> m, v;
};

/// One AdamW update with decoupled weight decay and bias-corrected moments:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
/// `step` is 1-based. State is lazily zero-initialized on first use.
template <class T>
void adamw_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                AdamState<T>& state, const AdamWOptions& options, std::size_t step);

/// Linear warmup from 0 to config.lr over the warmup steps, then constant (or
/// cosine decay to 0 at total_steps).
double lr_at(std::size_t step, const TrainConfig& config, std::size_t total_steps);

/// Resolved warmup length for a run of `total_steps` optimizer steps.
std::size_t warmup_steps(const TrainConfig& config, std::size_t total_steps);

/// Scales grads in place so their global L2 norm is at most max_norm. Returns
/// the norm before clipping.
template <class T>
double clip_grad_norm(std::span<Tensor<T>* const> grads, double max_norm);

struct MetricsRecord {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::string split;
  double loss = 0;
  double accuracy = 0;
  double lr = 0;
  double seconds = 0;
};

/// One JSON object, no trailing newline.
std::string to_json_line(const MetricsRecord& record);

using MetricsSink = std::function<void(const MetricsRecord&)>;

/// Mutable state of one training run.
template <class T>
struct TrainState {
  ModelParams<T> params;
  AdamState<T> optimizer;
  std::size_t step = 0;
  std::size_t total_steps = 0;
  Rng shuffle_rng;
  Rng dropout_rng;
};

template <class T>
TrainState<T> make_train_state(const ModelConfig& model, const TrainConfig& train,
                               std::uint64_t seed, std::size_t train_size);

/// Shuffles (seeded), iterates mini-batches and steps the optimizer. Returns
/// mean loss and accuracy over the epoch. Throws DataError on an empty split.
template <class T>
MetricsRecord train_epoch(TrainState<T>& state, const ModelConfig& model, const TrainConfig& train,
                          std::span<const Graph> data, std::size_t epoch);

/// Eval-mode loss and accuracy; never mutates parameters.
template <class T>
MetricsRecord evaluate(const ModelParams<T>& params, const ModelConfig& model,
                       std::span<const Graph> data, std::size_t batch_size,
                       const std::string& split = "eval");

struct SeedResult {
  std::uint64_t seed = 0;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0;
  double test_accuracy = 0;
  double test_loss = 0;
  std::size_t parameters = 0;
};

struct ExperimentResult {
  std::vector<SeedResult> seeds;
  double mean_test_accuracy = 0;
  /// Sample standard deviation (n - 1); 0 for a single seed.
  double std_test_accuracy = 0;
};

struct ExperimentOptions {
  MetricsSink sink;
  /// When set, each seed's best-validation parameters are written to
  /// <dir>/seed_<seed>.ckpt.json.
  std::optional<std::filesystem::path> checkpoint_dir;
};

/// For each seed: split 8:1:1, train, keep the best-validation parameters and
/// report their test accuracy; aggregate mean and std over seeds.
ExperimentResult run_experiment(std::span<const Graph> graphs, const ModelConfig& model,
                                const TrainConfig& train, const ExperimentOptions& options = {});

/// JSON summary: mean, std, per-seed metrics and the full effective config.
std::string summary_json(const ExperimentResult& result, const ModelConfig& model,
                         const TrainConfig& train, const std::string& extra_json = "{}");

double mean(std::span<const double> xs);
double sample_std(std::span<const double> xs);

}  // namespace mnagt
