#include "mnagt/checkpoint.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

namespace mnagt {

using nlohmann::json;

namespace {

json plan_to_json(const KernelPlan& plan) {
  json kernels = json::array();
  for (const auto& k : plan.kernels) kernels.push_back({{"hop", k.hop}, {"propagate_value", k.propagate_value}});
  return {{"aggregator", to_string(plan.aggregator)}, {"kernels", kernels}};
}

KernelPlan plan_from_json(const json& j) {
  KernelPlan plan;
  plan.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
  for (const auto& k : j.at("kernels"))
    plan.kernels.push_back({k.at("hop").get<int>(), k.at("propagate_value").get<bool>()});
  return plan;
}

json model_to_json(const ModelConfig& c) {
  json plans = json::array();
  for (const auto& p : c.layer_plans) plans.push_back(plan_to_json(p));
  return {
      {"input_dim", c.input_dim},
      {"num_classes", c.num_classes},
      {"layers", c.num_layers},
      {"ffn_dim", c.effective_ffn_dim()},
      {"dim", c.mna.dim},
      {"heads", c.mna.heads},
      {"head_dim", c.mna.head_dim},
      {"c", c.mna.max_hop},
      {"hops", c.mna.hops},
      {"aggregator", to_string(c.mna.aggregator)},
      {"score_activation", to_string(c.mna.score_activation)},
      {"dropout", c.mna.dropout},
      {"pooling", to_string(c.pooling)},
      {"norm", to_string(c.norm)},
      {"gelu", c.gelu == ops::GeluForm::Tanh ? "tanh" : "erf"},
      {"ln_eps", c.ln_eps},
      {"layer_plans", plans},
  };
}

ModelConfig model_from_json(const json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.num_classes = j.at("num_classes").get<std::size_t>();
  c.num_layers = j.at("layers").get<std::size_t>();
  c.ffn_dim = j.at("ffn_dim").get<std::size_t>();
  c.mna.dim = j.at("dim").get<std::size_t>();
  c.mna.heads = j.at("heads").get<std::size_t>();
  c.mna.head_dim = j.at("head_dim").get<std::size_t>();
  c.mna.max_hop = j.at("c").get<int>();
  c.mna.hops = j.at("hops").get<std::vector<int>>();
  c.mna.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
  c.mna.score_activation = parse_score_activation(j.at("score_activation").get<std::string>());
  c.mna.dropout = j.at("dropout").get<double>();
  c.pooling = parse_pool_kind(j.at("pooling").get<std::string>());
  c.norm = parse_normalization(j.at("norm").get<std::string>());
  c.gelu = j.at("gelu").get<std::string>() == "erf" ? ops::GeluForm::Erf : ops::GeluForm::Tanh;
  c.ln_eps = j.at("ln_eps").get<double>();
  for (const auto& p : j.at("layer_plans")) c.layer_plans.push_back(plan_from_json(p));
  c.validate();
  return c;
}

json train_to_json(const TrainConfig& c) {
  return {
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"dropout", c.dropout},
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"warmup_steps", c.warmup_steps},
      {"schedule", to_string(c.schedule)},
      {"seeds", c.seeds},
      {"betas", {c.beta1, c.beta2}},
      {"eps", c.eps},
      {"clip_norm", c.clip_norm},
      {"split", c.split},
      {"record_time", c.record_time},
  };
}

}  // namespace

std::string model_config_json(const ModelConfig& config) { return model_to_json(config).dump(); }

ModelConfig model_config_from_json(const std::string& text) {
  try {
    return model_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw DataError(std::string("bad model config: ") + e.what());
  }
}

std::string train_config_json(const TrainConfig& config) { return train_to_json(config).dump(); }

TrainConfig train_config_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    TrainConfig c;
    c.lr = j.at("lr").get<double>();
    c.weight_decay = j.at("weight_decay").get<double>();
    c.dropout = j.at("dropout").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.warmup_steps = j.at("warmup_steps").get<long>();
    c.schedule = parse_lr_schedule(j.at("schedule").get<std::string>());
    c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    c.beta1 = j.at("betas").at(0).get<double>();
    c.beta2 = j.at("betas").at(1).get<double>();
    c.eps = j.at("eps").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.split = j.at("split").get<std::array<double, 3>>();
    c.record_time = j.at("record_time").get<bool>();
    return c;
  } catch (const json::exception& e) {
    throw DataError(std::string("bad train config: ") + e.what());
  }
}

template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<T>& params) {
  json tensors = json::array();
  for_each_param(params, [&tensors](const std::string& name, const Tensor<T>& t) {
    std::vector<double> values(t.values().begin(), t.values().end());
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"values", values}});
  });
  const json doc = {{"format", "mnagt-checkpoint"},
                    {"version", kCheckpointVersion},
                    {"config", model_to_json(config)},
                    {"params", tensors}};
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << doc.dump() << '\n';
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (doc.value("format", "") != "mnagt-checkpoint") throw DataError(path.string() + ": not a checkpoint");
  if (doc.value("version", 0) != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version");
  }
  Checkpoint<T> ckpt;
  try {
    ckpt.config = model_from_json(doc.at("config"));
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad config: " + e.what());
  }
  Rng rng(0);
  ckpt.params = init_model_params<T>(ckpt.config, rng);

  std::map<std::string, const json*> stored;
  for (const auto& entry : doc.at("params")) stored[entry.at("name").get<std::string>()] = &entry;
  std::size_t matched = 0;
  for_each_param(ckpt.params, [&](const std::string& name, Tensor<T>& t) {
    const auto it = stored.find(name);
    if (it == stored.end()) throw DataError(path.string() + ": missing parameter " + name);
    const json& entry = *it->second;
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != t.shape()) {
      throw DataError(path.string() + ": parameter " + name + " has shape " + shape_to_string(shape) +
                      ", config expects " + shape_to_string(t.shape()));
    }
    const auto values = entry.at("values").get<std::vector<double>>();
    if (values.size() != t.size()) throw DataError(path.string() + ": parameter " + name + " truncated");
    for (std::size_t i = 0; i < values.size(); ++i) t[i] = static_cast<T>(values[i]);
    ++matched;
  });
  if (matched != stored.size()) throw DataError(path.string() + ": unexpected extra parameters");
  return ckpt;
}

template void save_checkpoint<float>(const std::filesystem::path&, const ModelConfig&, const ModelParams<float>&);
template void save_checkpoint<double>(const std::filesystem::path&, const ModelConfig&, const ModelParams<double>&);
template Checkpoint<float> load_checkpoint<float>(const std::filesystem::path&);
template Checkpoint<double> load_checkpoint<double>(const std::filesystem::path&);

}  // namespace mnagt
