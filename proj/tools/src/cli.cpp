#include "mnagt/tools/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mnagt/checkpoint.hpp"
#include "mnagt/dataset.hpp"
#include "mnagt/synthetic.hpp"
#include "mnagt/tape.hpp"
#include "mnagt/tools/checks.hpp"
#include "mnagt/training.hpp"

namespace mnagt::cli {

namespace fs = std::filesystem;

namespace {

/// Built-in dataset name that needs no files.
constexpr const char* kSyntheticName = "triangles";

struct RunOptions {
  std::string dataset = "NCI1";
  std::string data_dir;
  std::string features = "auto";
  std::string norm = "sym";
  int c = 3;
  std::size_t heads = 3;
  std::size_t dim = 128;
  std::size_t head_dim = 8;
  std::size_t ffn_dim = 0;
  std::size_t layers = 4;
  std::string aggregator = "adaptive";
  std::string pooling = "mean";
  std::string score_activation = "tanh";
  std::string gelu = "tanh";
  TrainConfig train;
  std::string schedule = "constant";
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out;
  bool no_time = false;
};

struct VerifyOptions {
  std::vector<std::string> faults;
  std::size_t trials = 0;
};

template <class F>
auto field(const std::string& flag, F&& parse) {
  try {
    return parse();
  } catch (const ConfigError& e) {
    throw ConfigError(flag + ": " + e.what());
  }
}

void add_data_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--dataset", o.dataset, "TUDataset name, or 'triangles' for the built-in synthetic task")
      ->capture_default_str();
  cmd->add_option("--data-dir", o.data_dir, "Directory holding <name>/ or the <name>_*.txt files")
      ->envname("MNAGT_DATA_DIR");
  cmd->add_option("--features", o.features, "Node features: auto|degree|degree-onehot")->capture_default_str();
}

void add_run_options(CLI::App* cmd, RunOptions& o) {
  add_data_options(cmd, o);
  cmd->add_option("--norm", o.norm, "Adjacency normalization: sym|rw")->capture_default_str();
  cmd->add_option("--c", o.c, "Largest hop; kernels use hops 0..c")->capture_default_str();
  cmd->add_option("--heads", o.heads, "Attention heads per kernel")->capture_default_str();
  cmd->add_option("--dim", o.dim, "Model width d")->capture_default_str();
  cmd->add_option("--head-dim", o.head_dim, "Per-head width")->capture_default_str();
  cmd->add_option("--ffn-dim", o.ffn_dim, "FFN hidden width (0 = 2 * dim)")->capture_default_str();
  cmd->add_option("--layers", o.layers, "Number of layers")->capture_default_str();
  cmd->add_option("--aggregator", o.aggregator, "adaptive|sum|average|concat")->capture_default_str();
  cmd->add_option("--pooling", o.pooling, "mean|sum")->capture_default_str();
  cmd->add_option("--score-activation", o.score_activation, "tanh|identity|relu")->capture_default_str();
  cmd->add_option("--gelu", o.gelu, "tanh|erf")->capture_default_str();
  cmd->add_option("--lr", o.train.lr, "Peak learning rate")->capture_default_str();
  cmd->add_option("--weight-decay", o.train.weight_decay, "AdamW weight decay")->capture_default_str();
  cmd->add_option("--dropout", o.train.dropout, "Dropout rate")->capture_default_str();
  cmd->add_option("--epochs", o.train.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch-size", o.train.batch_size, "Graphs per batch")->capture_default_str();
  cmd->add_option("--warmup-steps", o.train.warmup_steps, "Warmup steps (-1 = 10% of all steps)")
      ->capture_default_str();
  cmd->add_option("--schedule", o.schedule, "After warmup: constant|cosine")->capture_default_str();
  cmd->add_option("--clip-norm", o.train.clip_norm, "Global gradient-norm clip (0 disables)")
      ->capture_default_str();
  cmd->add_option("--seeds", o.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  cmd->add_option("--out", o.out, "Output directory for metrics, summary and checkpoints");
  cmd->add_flag("--no-time", o.no_time, "Write seconds=0 so metric streams are byte-comparable");
}

FeatureMode parse_features(const std::string& s) {
  if (s == "auto") return FeatureMode::Auto;
  if (s == "degree") return FeatureMode::Degree;
  if (s == "degree-onehot") return FeatureMode::DegreeOneHot;
  throw ConfigError("unknown feature mode '" + s + "' (auto|degree|degree-onehot)");
}

Aggregator parse_cli_aggregator(const std::string& s) {
  const Aggregator a = parse_aggregator(s == "concat" ? "concatenate" : s);
  if (a == Aggregator::Single) throw ConfigError("'single' is reserved for special-case plans");
  return a;
}

/// Builds and validates everything that does not depend on the data.
std::pair<ModelConfig, TrainConfig> resolve(const RunOptions& o) {
  ModelConfig m;
  m.num_layers = o.layers;
  m.ffn_dim = o.ffn_dim;
  m.mna.max_hop = o.c;
  m.mna.heads = o.heads;
  m.mna.dim = o.dim;
  m.mna.head_dim = o.head_dim;
  m.mna.aggregator = field("--aggregator", [&] { return parse_cli_aggregator(o.aggregator); });
  m.mna.score_activation = field("--score-activation", [&] { return parse_score_activation(o.score_activation); });
  m.pooling = field("--pooling", [&] { return parse_pool_kind(o.pooling); });
  m.norm = field("--norm", [&] { return parse_normalization(o.norm); });
  if (o.gelu != "tanh" && o.gelu != "erf") throw ConfigError("--gelu: expected tanh|erf, got '" + o.gelu + "'");
  m.gelu = o.gelu == "erf" ? ops::GeluForm::Erf : ops::GeluForm::Tanh;
  TrainConfig t = o.train;
  t.schedule = field("--schedule", [&] { return parse_lr_schedule(o.schedule); });
  t.seeds = o.seeds;
  t.record_time = !o.no_time;
  m.mna.dropout = t.dropout;
  field("--features", [&] { return parse_features(o.features); });
  t.validate();
  m.validate();
  return {m, t};
}

std::vector<Graph> load_graphs(const RunOptions& o) {
  if (o.dataset == kSyntheticName) return triangles_vs_paths(200, 0);
  const fs::path root = o.data_dir.empty() ? fs::path("data") : fs::path(o.data_dir);
  if (!fs::exists(root)) throw DataError("data directory not found: " + root.string());
  const fs::path nested = root / o.dataset;
  const fs::path dir = fs::exists(nested / (o.dataset + "_A.txt")) ? nested : root;
  LoadOptions load;
  load.features = parse_features(o.features);
  return load_tudataset(dir, o.dataset, load);
}

std::string run_echo(const RunOptions& o) {
  nlohmann::ordered_json j;
  j["dataset"] = o.dataset;
  j["data_dir"] = o.data_dir;
  j["features"] = o.features;
  j["out"] = o.out;
  return j.dump();
}

class Outputs {
 public:
  Outputs(const std::string& dir, const std::string& metrics_name, std::ostream& out) : out_(out) {
    if (dir.empty()) return;
    dir_ = dir;
    fs::create_directories(dir_);
    metrics_.open(dir_ / metrics_name);
    if (!metrics_) throw DataError("cannot write " + (dir_ / metrics_name).string());
  }

  void metric(const MetricsRecord& r) {
    const std::string line = to_json_line(r);
    out_ << line << '\n';
    if (metrics_.is_open()) metrics_ << line << '\n';
  }

  void summary(const std::string& name, const std::string& json) {
    out_ << json << '\n';
    if (dir_.empty()) return;
    std::ofstream f(dir_ / name);
    f << json << '\n';
  }

  std::optional<fs::path> checkpoints(const std::string& sub) const {
    if (dir_.empty()) return std::nullopt;
    return dir_ / sub;
  }

 private:
  std::ostream& out_;
  fs::path dir_;
  std::ofstream metrics_;
};

ModelConfig fit_to_data(ModelConfig m, std::span<const Graph> graphs) {
  if (graphs.empty()) throw DataError("dataset is empty");
  m.input_dim = graphs.front().feature_dim();
  m.num_classes = static_cast<std::size_t>(count_classes(graphs));
  m.validate();
  return m;
}

int cmd_train(const RunOptions& o, std::ostream& out, std::ostream& err) {
  auto [model, train] = resolve(o);
  const auto graphs = load_graphs(o);
  model = fit_to_data(model, graphs);
  Outputs sink(o.out, "metrics.jsonl", out);
  ExperimentOptions options;
  options.sink = [&sink](const MetricsRecord& r) { sink.metric(r); };
  options.checkpoint_dir = sink.checkpoints("checkpoints");
  const ExperimentResult result = run_experiment(graphs, model, train, options);
  sink.summary("summary.json", summary_json(result, model, train, run_echo(o)));
  err << std::fixed << std::setprecision(4) << "test accuracy " << result.mean_test_accuracy << " +- "
      << result.std_test_accuracy << " over " << result.seeds.size() << " seed(s)\n";
  return kOk;
}

int cmd_ablate(const RunOptions& o, std::ostream& out, std::ostream& err) {
  auto [base, train] = resolve(o);
  const auto graphs = load_graphs(o);
  base = fit_to_data(base, graphs);
  Outputs sink(o.out, "ablate_metrics.jsonl", out);

  struct Row {
    std::string name;
    ExperimentResult result;
  };
  std::vector<Row> rows;
  for (const auto& [label, agg] : {std::pair{"sum", Aggregator::Sum}, std::pair{"average", Aggregator::Average},
                                   std::pair{"concat", Aggregator::Concatenate},
                                   std::pair{"adaptive", Aggregator::Adaptive}}) {
    ModelConfig model = base;
    model.mna.aggregator = agg;
    ExperimentOptions options;
    options.sink = [&sink](const MetricsRecord& r) { sink.metric(r); };
    err << "ablate: " << label << '\n';
    rows.push_back({label, run_experiment(graphs, model, train, options)});
  }

  nlohmann::ordered_json table = nlohmann::ordered_json::array();
  std::ostringstream seeds;
  for (std::size_t i = 0; i < train.seeds.size(); ++i) seeds << (i ? "," : "") << train.seeds[i];
  out << "# seeds " << seeds.str() << " (shared by every aggregator)\n";
  out << "# aggregator  mean_acc  std_acc\n";
  for (const auto& row : rows) {
    out << std::left << std::setw(12) << row.name << std::right << std::fixed << std::setprecision(4) << "  "
        << row.result.mean_test_accuracy << "  " << row.result.std_test_accuracy << '\n';
    std::vector<double> per_seed;
    for (const auto& s : row.result.seeds) per_seed.push_back(s.test_accuracy);
    table.push_back({{"aggregator", row.name},
                     {"mean", row.result.mean_test_accuracy},
                     {"std", row.result.std_test_accuracy},
                     {"per_seed", per_seed}});
  }
  std::vector<std::size_t> order(rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&rows](std::size_t a, std::size_t b) {
    return rows[a].result.mean_test_accuracy > rows[b].result.mean_test_accuracy;
  });
  std::string ranking;
  for (std::size_t i : order) ranking += (ranking.empty() ? "" : " > ") + rows[i].name;
  out << "# ordering " << ranking << '\n';

  nlohmann::ordered_json summary;
  summary["ablation"] = table;
  summary["seeds"] = train.seeds;
  summary["ordering"] = ranking;
  summary["config"] = {{"model", nlohmann::ordered_json::parse(model_config_json(base))},
                       {"train", nlohmann::ordered_json::parse(train_config_json(train))},
                       {"run", nlohmann::ordered_json::parse(run_echo(o))}};
  sink.summary("ablation.json", summary.dump());
  return kOk;
}

int report_exit(const checks::Report& report, std::ostream& out) {
  out << checks::format_report(report);
  out << (report.passed() ? "all checks passed" : std::to_string(report.failures()) + " check(s) failed") << " ("
      << report.results.size() << " total)\n";
  return report.passed() ? kOk : kVerifyFailed;
}

struct FaultScope {
  explicit FaultScope(const std::vector<std::string>& ops) {
    if (!ops.empty()) fault::flip_backward_sign(ops);
  }
  ~FaultScope() { fault::clear(); }
};

int cmd_gradcheck(const VerifyOptions& v, std::ostream& out) {
  FaultScope scope(v.faults);
  checks::Report report = checks::op_gradient_checks();
  report.append(checks::model_gradient_check());
  return report_exit(report, out);
}

int cmd_verify(const VerifyOptions& v, std::ostream& out) {
  FaultScope scope(v.faults);
  checks::Report report = checks::op_gradient_checks();
  report.append(checks::model_gradient_check());
  report.append(checks::oracle_equivalence(v.trials ? v.trials : 50));
  report.append(checks::structural_invariants(v.trials ? v.trials : 100));
  report.append(checks::special_case_reductions(v.trials ? v.trials : 20));
  return report_exit(report, out);
}

int cmd_inspect(const RunOptions& o, std::ostream& out) {
  field("--features", [&] { return parse_features(o.features); });
  const auto graphs = load_graphs(o);
  const DatasetStats s = dataset_stats(graphs);
  out << std::fixed << std::setprecision(2);
  out << "dataset      " << o.dataset << '\n';
  out << "graphs       " << s.graphs << '\n';
  out << "avg nodes    " << s.avg_nodes << '\n';
  out << "avg edges    " << s.avg_edges << '\n';
  out << "feature dim  " << s.feature_dim << '\n';
  out << "classes      " << s.num_classes() << '\n';
  for (const auto& [label, count] : s.class_histogram) out << "  class " << label << "    " << count << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-neighborhood attention graph transformer: training and verification"};
  app.require_subcommand(1, 1);
  app.set_config("--config", "", "key=value config file; [train] / [ablate] / [inspect] sections")
      ->check(CLI::ExistingFile);
  // Lets --config appear after the subcommand name too.
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunOptions run_opts;
  VerifyOptions verify_opts;
  CLI::App* train = app.add_subcommand("train", "Train and evaluate over one or more seeds");
  add_run_options(train, run_opts);
  CLI::App* ablate = app.add_subcommand("ablate", "Compare the four aggregators under shared seeds");
  add_run_options(ablate, run_opts);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  CLI::App* verify = app.add_subcommand("verify", "Gradient, oracle, invariant and reduction suites");
  for (CLI::App* cmd : {gradcheck, verify}) {
    cmd->add_option("--inject-fault", verify_opts.faults, "Negate the backward rule of an op (testing aid)")
        ->group("");
  }
  verify->add_option("--trials", verify_opts.trials, "Randomized trials per suite (0 = defaults)");
  CLI::App* inspect = app.add_subcommand("inspect", "Dataset statistics");
  add_data_options(inspect, run_opts);

  std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(run_opts, out, err);
    if (*ablate) return cmd_ablate(run_opts, out, err);
    if (*gradcheck) return cmd_gradcheck(verify_opts, out);
    if (*verify) return cmd_verify(verify_opts, out);
    if (*inspect) return cmd_inspect(run_opts, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kConfigError;
}

}  // namespace mnagt::cli
