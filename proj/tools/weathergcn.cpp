// weathergcn: train, evaluate and inspect WeatherGCNet wind-speed models.

#include "wgcn/config.hpp"
#include "wgcn/errors.hpp"
#include "wgcn/evaluation.hpp"
#include "wgcn/selftest.hpp"
#include "wgcn/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace wgcn;

namespace {

struct TrainArgs {
  std::string config;
  std::optional<long long> horizon, seed, epochs, batch_size, patience;
  std::optional<double> lr;
  std::optional<bool> gamma;
  std::optional<std::string> output_dir, data, schema;
};

struct DataArgs {
  std::string checkpoint;
  std::string data;
  std::string schema;
};

std::ofstream open_for_write(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  return out;
}

std::vector<std::string> read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open data file " + path.string());
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> cols;
  for (const auto& c : split_list(line)) cols.push_back(trim(c));
  return cols;
}

bool header_fits(const std::vector<std::string>& header, const DatasetSchema& s) {
  for (const auto& city : s.cities)
    for (const auto& var : s.variables)
      if (std::find(header.begin(), header.end(), city + "." + var) == header.end()) return false;
  return true;
}

// Schema for data handed to evaluate/export: an explicit schema file, else
// the checkpoint's schema if the columns are there, else whichever built-in
// schema the header matches.
DatasetSchema data_schema(const DataArgs& a, const Checkpoint& ckpt) {
  if (!a.schema.empty()) return DatasetSchema::load(a.schema);
  const auto header = read_header(a.data);
  if (header_fits(header, ckpt.schema)) return ckpt.schema;
  for (auto kind : {DatasetKind::danish, DatasetKind::dutch}) {
    const DatasetSchema s = DatasetSchema::for_kind(kind);
    if (header_fits(header, s)) return s;
  }
  return ckpt.schema;  // load_csv names the missing column
}

PreparedData prepare_for(const Checkpoint& ckpt, const DataArgs& a) {
  const DatasetSchema schema = data_schema(a, ckpt);
  check_compatible(ckpt, schema);
  const RawSeries raw = load_csv(a.data, schema);
  PreparedData data = prepare_data(raw, schema, ckpt.split, ckpt.config.window, ckpt.config.horizon);
  if (data.norm.min != ckpt.norm.min || data.norm.max != ckpt.norm.max)
    std::cerr << "warning: normalization statistics of " << a.data
              << " differ from the training data; metrics use the checkpoint's statistics\n";
  data.norm = ckpt.norm;
  return data;
}

int cmd_train(const TrainArgs& a) {
  RunConfig cfg = RunConfig::from_file(a.config);
  if (a.horizon) cfg.set("horizon", std::to_string(*a.horizon));
  if (a.seed) cfg.set("seed", std::to_string(*a.seed));
  if (a.epochs) cfg.set("max_epochs", std::to_string(*a.epochs));
  if (a.batch_size) cfg.set("batch_size", std::to_string(*a.batch_size));
  if (a.patience) cfg.set("patience", std::to_string(*a.patience));
  if (a.lr) cfg.set("learning_rate", format_double(*a.lr));
  if (a.gamma) cfg.set("gamma_variant", *a.gamma ? "true" : "false");
  if (a.output_dir) cfg.set("output_dir", *a.output_dir);
  if (a.data) cfg.set("data", *a.data);
  if (a.schema) cfg.set("schema", *a.schema);
  cfg.validate();

  const auto& sweep = protocol_horizons(cfg.train.dataset);
  if (std::find(sweep.begin(), sweep.end(), cfg.train.horizon) == sweep.end()) {
    std::string list;
    for (auto h : sweep) list += (list.empty() ? "" : ",") + std::to_string(h);
    std::cerr << "warning: horizon " << cfg.train.horizon << " is outside the published " << to_string(cfg.train.dataset)
              << " sweep {" << list << "}\n";
  }

  const PreparedData data = load_prepared(cfg);
  std::cerr << "samples: train " << data.samples.train.size() << ", validation " << data.samples.val.size()
            << ", test " << data.samples.test.size() << "\n";

  fs::create_directories(cfg.output_dir);
  nlohmann::json manifest;
  manifest["config"] = cfg.entries();
  manifest["seed"] = cfg.train.seed;
  manifest["output_dir"] = cfg.output_dir.string();
  manifest["sha256"]["config"] = sha256_file(a.config);
  manifest["sha256"]["data"] = sha256_file(cfg.data);
  if (!cfg.schema.empty()) manifest["sha256"]["schema"] = sha256_file(cfg.schema);
  {
    std::ofstream out = open_for_write(cfg.output_dir / "manifest");
    out << manifest.dump(1) << "\n";
  }

  std::ofstream log = open_for_write(cfg.output_dir / "log.csv");
  log << "epoch,train_loss,val_mae,val_mse\n";
  auto observer = [&](const EpochRecord& r) {
    log << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.val_mae) << ','
        << format_double(r.val_mse) << '\n';
    log.flush();
    std::cerr << "epoch " << r.epoch << "  train mse " << r.train_loss << "  val mae " << r.val_mae << "\n";
  };

  auto run = cfg.entries();
  run.erase("output_dir");
  const fs::path ckpt_path = cfg.output_dir / "checkpoint";
  try {
    Checkpoint ckpt = train(cfg.train, data, observer);
    ckpt.run = run;
    save_checkpoint(ckpt, ckpt_path);
    std::cout << "stopped: " << ckpt.status << ", best epoch " << ckpt.best_epoch << "\ncheckpoint: " << ckpt_path.string()
              << "\n";
  } catch (const TrainingAborted& e) {
    Checkpoint partial = e.partial();
    partial.run = run;
    save_checkpoint(partial, ckpt_path);
    std::cerr << "error: " << e.what() << "\npartial checkpoint: " << ckpt_path.string() << "\n";
    return 3;
  }
  return 0;
}

int cmd_evaluate(const DataArgs& a, const std::string& csv) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const PreparedData data = prepare_for(ckpt, a);
  const MetricsReport report = evaluate(ckpt, data);
  write_report_text(report, std::cout);
  if (!csv.empty()) {
    const fs::path p(csv);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out = open_for_write(p);
    write_report_csv(report, out);
  }
  return 0;
}

fs::path exports_dir(const std::string& checkpoint) { return fs::path(checkpoint).parent_path() / "exports"; }

int cmd_export_predictions(const DataArgs& a, std::string out) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  const PreparedData data = prepare_for(ckpt, a);
  if (out.empty()) out = (exports_dir(a.checkpoint) / "predictions.csv").string();
  export_predictions(ckpt, data, out);
  std::cout << out << "\n";
  return 0;
}

int cmd_export_adjacency(const std::string& checkpoint, int layer, bool raw, std::string out) {
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const AdjacencyView view = raw ? AdjacencyView::raw : AdjacencyView::transformed;
  if (out.empty())
    out = (exports_dir(checkpoint) /
           ("adjacency_layer" + std::to_string(layer) + (raw ? "_raw" : "_transformed") + ".csv"))
              .string();
  export_adjacency(ckpt, layer, view, out);
  std::cout << out << "\n";
  return 0;
}

int cmd_selftest(const std::string& fault) {
  SelfTestOptions opts;
  if (fault == "degree-eps")
    opts.transform.degree_epsilon = 1.5;
  else if (!fault.empty())
    throw ConfigError("unknown fault `" + fault + "` (known: degree-eps)");
  const auto start = std::chrono::steady_clock::now();
  const auto results = run_property_suite(opts);
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  [" << r.detail << "]\n";
    failed += r.passed ? 0 : 1;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::cout << results.size() - static_cast<std::size_t>(failed) << "/" << results.size() << " properties passed in "
            << secs << " s\n";
  if (failed) {
    std::cout << "failed:";
    for (const auto& r : results)
      if (!r.passed) std::cout << "\n  " << r.name;
    std::cout << "\n";
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WeatherGCNet wind-speed forecasting"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train a model; command-line flags override config values");
  train_cmd->add_option("--config", ta.config, "run configuration file")->required();
  train_cmd->add_option("--horizon", ta.horizon, "hours ahead");
  train_cmd->add_option("--seed", ta.seed);
  train_cmd->add_option("--epochs", ta.epochs, "maximum epochs");
  train_cmd->add_option("--lr", ta.lr, "Adam learning rate");
  train_cmd->add_option("--batch-size", ta.batch_size);
  train_cmd->add_option("--patience", ta.patience, "early-stopping patience in epochs");
  train_cmd->add_option("--gamma", ta.gamma, "learnable self-loop strength (true/false)");
  train_cmd->add_option("--output-dir", ta.output_dir);
  train_cmd->add_option("--data", ta.data, "wide CSV");
  train_cmd->add_option("--schema", ta.schema, "schema file");

  DataArgs ea;
  std::string csv;
  auto* eval_cmd = app.add_subcommand("evaluate", "test-set metrics of a checkpoint");
  eval_cmd->add_option("--checkpoint", ea.checkpoint)->required();
  eval_cmd->add_option("--data", ea.data)->required();
  eval_cmd->add_option("--schema", ea.schema);
  eval_cmd->add_option("--csv", csv, "also write the report as CSV");

  auto* export_cmd = app.add_subcommand("export", "write predictions or adjacency matrices as CSV");
  export_cmd->require_subcommand(1);
  DataArgs pa;
  std::string pred_out;
  auto* pred_cmd = export_cmd->add_subcommand("predictions", "test-set predictions in source units");
  pred_cmd->add_option("--checkpoint", pa.checkpoint)->required();
  pred_cmd->add_option("--data", pa.data)->required();
  pred_cmd->add_option("--schema", pa.schema);
  pred_cmd->add_option("--out", pred_out, "default: exports/predictions.csv next to the checkpoint");

  std::string adj_ckpt, adj_out;
  int layer = 1;
  bool raw = false, transformed = false;
  auto* adj_cmd = export_cmd->add_subcommand("adjacency", "learnt adjacency of one ST-block");
  adj_cmd->add_option("--checkpoint", adj_ckpt)->required();
  adj_cmd->add_option("--layer", layer, "block 1..3")->capture_default_str();
  auto* raw_flag = adj_cmd->add_flag("--raw", raw, "untransformed weights");
  adj_cmd->add_flag("--transformed", transformed, "normalized matrix used in the forward pass (default)")
      ->excludes(raw_flag);
  adj_cmd->add_option("--out", adj_out);

  std::string fault;
  auto* self_cmd = app.add_subcommand("selftest", "gradient checks and fixed oracles");
  self_cmd->add_option("--inject-fault", fault, "deliberately break a component (degree-eps)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train_cmd) return cmd_train(ta);
    if (*eval_cmd) return cmd_evaluate(ea, csv);
    if (*pred_cmd) return cmd_export_predictions(pa, pred_out);
    if (*adj_cmd) return cmd_export_adjacency(adj_ckpt, layer, raw, adj_out);
    if (*self_cmd) return cmd_selftest(fault);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
