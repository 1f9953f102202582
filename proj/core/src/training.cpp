#include "mnagt/training.hpp"

#include <chrono>
#include <cmath>
#include <numbers>

#include <json.hpp>

#include "mnagt/batch.hpp"
#include "mnagt/checkpoint.hpp"

namespace mnagt {

std::string to_string(LrSchedule s) { return s == LrSchedule::WarmupConstant ? "constant" : "cosine"; }

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::WarmupConstant;
  if (s == "cosine") return LrSchedule::WarmupCosine;
  throw ConfigError("unknown schedule '" + s + "' (constant|cosine)");
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !std::isfinite(lr)) throw ConfigError("lr must be > 0");
  if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be >= 0");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must be in [0, 1)");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must list at least one seed");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw ConfigError("betas must be in [0, 1)");
  if (!(eps > 0)) throw ConfigError("eps must be > 0");
  if (!(clip_norm >= 0)) throw ConfigError("clip_norm must be >= 0");
  double total = 0;
  for (double r : split) {
    if (!(r >= 0)) throw ConfigError("split ratios must be >= 0");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

template <class T>
void adamw_step(std::span<Tensor<T>* const> params, std::span<const Tensor<T>* const> grads,
                AdamState<T>& state, const AdamWOptions& o, std::size_t step) {
  if (step < 1) throw ConfigError("adamw_step: step is 1-based");
  if (params.size() != grads.size()) {
    throw DimensionError("adamw_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " grads");
  }
  if (state.m.empty()) {
    for (const Tensor<T>* p : params) {
      state.m.emplace_back(p->shape());
      state.v.emplace_back(p->shape());
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adamw_step: optimizer state size mismatch");

  const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = *params[i];
    const Tensor<T>& g = *grads[i];
    Tensor<T>& m = state.m[i];
    Tensor<T>& v = state.v[i];
    if (g.shape() != p.shape() || m.shape() != p.shape()) {
      throw DimensionError("adamw_step: parameter " + std::to_string(i) + " has shape " +
                           shape_to_string(p.shape()) + ", gradient " + shape_to_string(g.shape()) +
                           ", state " + shape_to_string(m.shape()));
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = o.beta1 * m[j] + (1 - o.beta1) * gj;
      const double vj = o.beta2 * v[j] + (1 - o.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + o.eps) + o.weight_decay * p[j];
      p[j] = static_cast<T>(p[j] - o.lr * update);
    }
  }
}

std::size_t warmup_steps(const TrainConfig& config, std::size_t total_steps) {
  if (config.warmup_steps >= 0) return static_cast<std::size_t>(config.warmup_steps);
  return total_steps / 10;
}

double lr_at(std::size_t step, const TrainConfig& config, std::size_t total_steps) {
  const std::size_t w = warmup_steps(config, total_steps);
  if (w > 0 && step < w) return config.lr * static_cast<double>(step) / static_cast<double>(w);
  if (config.schedule == LrSchedule::WarmupConstant || total_steps <= w) return config.lr;
  const double t = std::min(1.0, static_cast<double>(step - w) / static_cast<double>(total_steps - w));
  return config.lr * 0.5 * (1 + std::cos(std::numbers::pi * t));
}

template <class T>
double clip_grad_norm(std::span<Tensor<T>* const> grads, double max_norm) {
  double sq = 0;
  for (const Tensor<T>* g : grads)
    for (T x : g->values()) sq += static_cast<double>(x) * x;
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  if (max_norm > 0 && norm > max_norm) {
    const double s = max_norm / (norm + 1e-6);
    for (Tensor<T>* g : grads)
      for (T& x : g->values()) x = static_cast<T>(x * s);
  }
  return norm;
}

std::string to_json_line(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["seed"] = r.seed;
  j["epoch"] = r.epoch;
  j["split"] = r.split;
  j["loss"] = r.loss;
  j["accuracy"] = r.accuracy;
  j["lr"] = r.lr;
  j["seconds"] = r.seconds;
  return j.dump();
}

template <class T>
TrainState<T> make_train_state(const ModelConfig& model, const TrainConfig& train, std::uint64_t seed,
                               std::size_t train_size) {
  Rng init = make_rng(seed, Stream::Init);
  TrainState<T> s{init_model_params<T>(model, init), {}, 0, 0, make_rng(seed, Stream::Shuffle),
                  make_rng(seed, Stream::Dropout)};
  const std::size_t per_epoch = (train_size + train.batch_size - 1) / train.batch_size;
  s.total_steps = per_epoch * train.epochs;
  return s;
}

namespace {

template <class T>
std::size_t count_correct(const Tensor<T>& logits, std::span<const int> labels) {
  std::size_t correct = 0;
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    const auto row = logits.row(b);
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == labels[b]) ++correct;
  }
  return correct;
}

template <class T>
void collect(ModelParams<T>& params, std::vector<Tensor<T>*>& out) {
  for_each_param(params, [&out](const std::string&, Tensor<T>& t) { out.push_back(&t); });
}

}  // namespace

template <class T>
MetricsRecord train_epoch(TrainState<T>& state, const ModelConfig& model, const TrainConfig& train,
                          std::span<const Graph> data, std::size_t epoch) {
  if (data.empty()) throw DataError("train_epoch: empty training split");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle(order.begin(), order.end(), state.shuffle_rng);

  std::vector<Tensor<T>*> params;
  collect(state.params, params);
  const AdamWOptions base{train.lr, train.beta1, train.beta2, train.eps, train.weight_decay};

  MetricsRecord rec;
  rec.epoch = epoch;
  rec.split = "train";
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += train.batch_size) {
    const std::size_t end = std::min(order.size(), start + train.batch_size);
    std::vector<const Graph*> members;
    for (std::size_t i = start; i < end; ++i) members.push_back(&data[order[i]]);
    const GraphBatch batch = make_batch(members, model.norm);

    Tape<T> tape;
    const auto vars = bind(tape, state.params);
    const ForwardContext ctx{true, &state.dropout_rng};
    const Var<T> logits = model_forward(tape, batch, vars, model, ctx);
    const Var<T> loss = ops::cross_entropy_logits(logits, std::span<const int>(batch.labels));
    tape.backward(loss);

    std::vector<Tensor<T>> grads;
    for_each_param(vars, [&](const std::string&, const Var<T>& v) { grads.push_back(tape.grad(v)); });
    std::vector<Tensor<T>*> grad_ptrs;
    for (auto& g : grads) grad_ptrs.push_back(&g);
    clip_grad_norm<T>(grad_ptrs, train.clip_norm);

    ++state.step;
    AdamWOptions options = base;
    options.lr = lr_at(state.step, train, state.total_steps);
    rec.lr = options.lr;
    std::vector<const Tensor<T>*> cgrads(grad_ptrs.begin(), grad_ptrs.end());
    adamw_step<T>(params, cgrads, state.optimizer, options, state.step);

    loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(end - start);
    correct += count_correct(logits.value(), batch.labels);
  }
  rec.loss = loss_sum / static_cast<double>(data.size());
  rec.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return rec;
}

template <class T>
MetricsRecord evaluate(const ModelParams<T>& params, const ModelConfig& model, std::span<const Graph> data,
                       std::size_t batch_size, const std::string& split) {
  if (data.empty()) throw DataError("evaluate: empty " + split + " split");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  MetricsRecord rec;
  rec.split = split;
  double loss_sum = 0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t end = std::min(data.size(), start + batch_size);
    const GraphBatch batch = make_batch(data.subspan(start, end - start), model.norm);
    Tape<T> tape;
    const auto vars = map_params(params, [&tape](const Tensor<T>& t) { return tape.constant(t); });
    const Var<T> logits = model_forward(tape, batch, vars, model);
    const Var<T> loss = ops::cross_entropy_logits(logits, std::span<const int>(batch.labels));
    loss_sum += static_cast<double>(loss.value()[0]) * static_cast<double>(end - start);
    correct += count_correct(logits.value(), batch.labels);
  }
  rec.loss = loss_sum / static_cast<double>(data.size());
  rec.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return rec;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) return 0;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) return 0;
  const double mu = mean(xs);
  double s = 0;
  for (double x : xs) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

ExperimentResult run_experiment(std::span<const Graph> graphs, const ModelConfig& model_in,
                                const TrainConfig& train, const ExperimentOptions& options) {
  using T = float;
  train.validate();
  ModelConfig model = model_in;
  model.mna.dropout = train.dropout;
  model.validate();
  if (graphs.empty()) throw DataError("run_experiment: no graphs");

  ExperimentResult result;
  std::vector<double> accs;
  for (const std::uint64_t seed : train.seeds) {
    const SplitIndices idx = split_indices(graphs.size(), train.split, seed);
    auto pick = [&graphs](const std::vector<std::size_t>& ids) {
      std::vector<Graph> out;
      out.reserve(ids.size());
      for (std::size_t i : ids) out.push_back(graphs[i]);
      return out;
    };
    const std::vector<Graph> tr = pick(idx.train), va = pick(idx.val), te = pick(idx.test);
    if (tr.empty() || va.empty() || te.empty()) {
      throw DataError("run_experiment: " + std::to_string(graphs.size()) + " graphs leave an empty split");
    }

    const auto started = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      if (!train.record_time) return 0.0;
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    };
    auto emit = [&](MetricsRecord rec) {
      rec.seed = seed;
      rec.seconds = elapsed();
      if (options.sink) options.sink(rec);
    };

    TrainState<T> state = make_train_state<T>(model, train, seed, tr.size());
    SeedResult sr;
    sr.seed = seed;
    sr.parameters = parameter_count(state.params);
    ModelParams<T> best = state.params;
    double best_val = -1;
    for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
      const MetricsRecord tr_rec = train_epoch<T>(state, model, train, tr, epoch);
      emit(tr_rec);
      MetricsRecord va_rec = evaluate<T>(state.params, model, va, train.batch_size, "val");
      va_rec.epoch = epoch;
      va_rec.lr = tr_rec.lr;
      emit(va_rec);
      if (va_rec.accuracy > best_val) {
        best_val = va_rec.accuracy;
        best = state.params;
        sr.best_epoch = epoch;
      }
    }
    MetricsRecord te_rec = evaluate<T>(best, model, te, train.batch_size, "test");
    te_rec.epoch = sr.best_epoch;
    te_rec.lr = lr_at(state.step, train, state.total_steps);
    emit(te_rec);
    sr.best_val_accuracy = best_val;
    sr.test_accuracy = te_rec.accuracy;
    sr.test_loss = te_rec.loss;
    if (options.checkpoint_dir) {
      save_checkpoint(*options.checkpoint_dir / ("seed_" + std::to_string(seed) + ".ckpt.json"), model, best);
    }
    result.seeds.push_back(sr);
    accs.push_back(sr.test_accuracy);
  }
  result.mean_test_accuracy = mean(accs);
  result.std_test_accuracy = sample_std(accs);
  return result;
}

std::string summary_json(const ExperimentResult& result, const ModelConfig& model, const TrainConfig& train,
                         const std::string& extra_json) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["summary"] = true;
  j["mean"] = result.mean_test_accuracy;
  j["std"] = result.std_test_accuracy;
  ordered_json seeds = ordered_json::array();
  for (const auto& s : result.seeds) {
    seeds.push_back({{"seed", s.seed},
                     {"best_epoch", s.best_epoch},
                     {"best_val_accuracy", s.best_val_accuracy},
                     {"test_accuracy", s.test_accuracy},
                     {"test_loss", s.test_loss},
                     {"parameters", s.parameters}});
  }
  j["per_seed"] = seeds;
  ModelConfig echoed = model;
  echoed.mna.dropout = train.dropout;
  j["config"] = {{"model", ordered_json::parse(model_config_json(echoed))},
                 {"train", ordered_json::parse(train_config_json(train))},
                 {"run", ordered_json::parse(extra_json)}};
  return j.dump();
}

#define MNAGT_INSTANTIATE_TRAINING(T)                                                                   \
  template void adamw_step<T>(std::span<Tensor<T>* const>, std::span<const Tensor<T>* const>,          \
                              AdamState<T>&, const AdamWOptions&, std::size_t);                          \
  template double clip_grad_norm<T>(std::span<Tensor<T>* const>, double);                               \
  template TrainState<T> make_train_state<T>(const ModelConfig&, const TrainConfig&, std::uint64_t,     \
                                             std::size_t);                                              \
  template MetricsRecord train_epoch<T>(TrainState<T>&, const ModelConfig&, const TrainConfig&,         \
                                        std::span<const Graph>, std::size_t);                           \
  template MetricsRecord evaluate<T>(const ModelParams<T>&, const ModelConfig&, std::span<const Graph>, \
                                     std::size_t, const std::string&);

MNAGT_INSTANTIATE_TRAINING(float)
MNAGT_INSTANTIATE_TRAINING(double)

#undef MNAGT_INSTANTIATE_TRAINING

}  // namespace mnagt
