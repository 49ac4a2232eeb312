#include "wgcn/trainer.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace wgcn {

using json = nlohmann::json;

namespace {

constexpr const char* format_name = "weathergcnet-checkpoint";

json tensor_to_json(const Tensor& t) {
  return {{"shape", t.shape()}, {"data", std::vector<double>(t.data().begin(), t.data().end())}};
}

Tensor tensor_from_json(const json& j) {
  const auto shape = j.at("shape").get<Shape>();
  const auto data = j.at("data").get<std::vector<double>>();
  Vector v = Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
  return Tensor(shape, std::move(v));
}

json config_to_json(const TrainConfig& c) {
  return {{"dataset", to_string(c.dataset)},
          {"horizon", c.horizon},
          {"window", c.window},
          {"temporal_kernel", c.temporal_kernel},
          {"gamma_variant", c.gamma_variant},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"max_epochs", c.max_epochs},
          {"patience", c.patience},
          {"seed", c.seed},
          {"block_channels", c.block_channels},
          {"reduce_channels", c.reduce_channels}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.dataset = parse_dataset_kind(j.at("dataset").get<std::string>());
  c.horizon = j.at("horizon").get<Index>();
  c.window = j.at("window").get<Index>();
  c.temporal_kernel = j.at("temporal_kernel").get<Index>();
  c.gamma_variant = j.at("gamma_variant").get<bool>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<Index>();
  c.max_epochs = j.at("max_epochs").get<Index>();
  c.patience = j.at("patience").get<Index>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.block_channels = j.at("block_channels").get<std::vector<Index>>();
  c.reduce_channels = j.at("reduce_channels").get<Index>();
  return c;
}

json schema_to_json(const DatasetSchema& s) {
  return {{"kind", to_string(s.kind)},         {"cities", s.cities},
          {"variables", s.variables},          {"units", s.units},
          {"wind_variable", s.wind_variable},  {"target_cities", s.target_cities}};
}

DatasetSchema schema_from_json(const json& j) {
  DatasetSchema s;
  s.kind = parse_dataset_kind(j.at("kind").get<std::string>());
  s.cities = j.at("cities").get<std::vector<std::string>>();
  s.variables = j.at("variables").get<std::vector<std::string>>();
  s.units = j.at("units").get<std::vector<std::string>>();
  s.wind_variable = j.at("wind_variable").get<std::string>();
  s.target_cities = j.at("target_cities").get<std::vector<std::string>>();
  return s;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  json j;
  j["format"] = format_name;
  j["version"] = Checkpoint::format_version;
  j["config"] = config_to_json(ckpt.config);
  j["run"] = ckpt.run;
  j["schema"] = schema_to_json(ckpt.schema);
  j["split"] = {{"kind", to_string(ckpt.split.kind)},
                {"train_start", format_timestamp(ckpt.split.train_start)},
                {"test_start", format_timestamp(ckpt.split.test_start)},
                {"test_end", format_timestamp(ckpt.split.test_end)},
                {"validation_fraction", ckpt.split.validation_fraction}};
  j["norm_stats"] = {{"variables", ckpt.norm.variables},
                     {"min", ckpt.norm.min},
                     {"max", ckpt.norm.max},
                     {"wind_index", ckpt.norm.wind_index}};

  const ModelConfig& mc = ckpt.model.config;
  j["model"] = {{"input_channels", mc.input_channels}, {"window", mc.window},
                {"vertices", mc.vertices},             {"outputs", mc.outputs},
                {"block_channels", mc.block_channels}, {"reduce_channels", mc.reduce_channels},
                {"temporal_kernel", mc.temporal_kernel}, {"gamma_variant", mc.gamma_variant}};
  json params = json::object();
  for (const Parameter* p : ckpt.model.parameters()) params[p->name()] = tensor_to_json(p->value());
  j["parameters"] = std::move(params);
  json stats = json::object();
  for (const auto& [name, s] : ckpt.model.running_stats()) {
    json e = {{"initialized", s->initialized}};
    if (s->initialized) {
      e["mean"] = tensor_to_json(s->mean);
      e["var"] = tensor_to_json(s->var);
    }
    stats[name] = std::move(e);
  }
  j["running_stats"] = std::move(stats);

  json hist = json::array();
  for (const auto& r : ckpt.history)
    hist.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_mae", r.val_mae}, {"val_mse", r.val_mse}});
  j["history"] = std::move(hist);
  j["best_epoch"] = ckpt.best_epoch;
  j["status"] = ckpt.status;
  return j.dump(1) + "\n";
}

Checkpoint deserialize_checkpoint(const std::string& text, const std::string& source) {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != format_name) throw LoadError(source + ": not a checkpoint file");
    const int version = j.at("version").get<int>();
    if (version != Checkpoint::format_version)
      throw LoadError(source + ": checkpoint version " + std::to_string(version) + " (supported: " +
                      std::to_string(Checkpoint::format_version) + ")");

    Checkpoint c;
    c.config = config_from_json(j.at("config"));
    c.run = j.at("run").get<std::map<std::string, std::string>>();
    c.schema = schema_from_json(j.at("schema"));
    const json& sp = j.at("split");
    c.split.kind = parse_dataset_kind(sp.at("kind").get<std::string>());
    c.split.train_start = parse_timestamp(sp.at("train_start").get<std::string>());
    c.split.test_start = parse_timestamp(sp.at("test_start").get<std::string>());
    c.split.test_end = parse_timestamp(sp.at("test_end").get<std::string>());
    c.split.validation_fraction = sp.at("validation_fraction").get<double>();
    const json& ns = j.at("norm_stats");
    c.norm.variables = ns.at("variables").get<std::vector<std::string>>();
    c.norm.min = ns.at("min").get<std::vector<double>>();
    c.norm.max = ns.at("max").get<std::vector<double>>();
    c.norm.wind_index = ns.at("wind_index").get<Index>();

    const json& m = j.at("model");
    ModelConfig mc;
    mc.input_channels = m.at("input_channels").get<Index>();
    mc.window = m.at("window").get<Index>();
    mc.vertices = m.at("vertices").get<Index>();
    mc.outputs = m.at("outputs").get<Index>();
    mc.block_channels = m.at("block_channels").get<std::vector<Index>>();
    mc.reduce_channels = m.at("reduce_channels").get<Index>();
    mc.temporal_kernel = m.at("temporal_kernel").get<Index>();
    mc.gamma_variant = m.at("gamma_variant").get<bool>();
    c.model = ModelParams::initialize(mc, 0);

    const json& params = j.at("parameters");
    for (Parameter* p : c.model.parameters()) {
      if (!params.contains(p->name())) throw LoadError(source + ": missing parameter " + p->name());
      Tensor t = tensor_from_json(params.at(p->name()));
      if (t.shape() != p->value().shape())
        throw LoadError(source + ": parameter " + p->name() + " has shape " + to_string(t.shape()) + ", expected " +
                        to_string(p->value().shape()));
      p->value() = std::move(t);
    }
    if (params.size() != c.model.parameters().size()) throw LoadError(source + ": unexpected extra parameters");
    const json& stats = j.at("running_stats");
    for (auto& [name, s] : c.model.running_stats()) {
      const json& e = stats.at(name);
      s->initialized = e.at("initialized").get<bool>();
      if (s->initialized) {
        s->mean = tensor_from_json(e.at("mean"));
        s->var = tensor_from_json(e.at("var"));
      }
    }
    for (const json& r : j.at("history"))
      c.history.push_back({r.at("epoch").get<Index>(), r.at("train_loss").get<double>(), r.at("val_mae").get<double>(),
                           r.at("val_mse").get<double>()});
    c.best_epoch = j.at("best_epoch").get<Index>();
    c.status = j.at("status").get<std::string>();
    return c;
  } catch (const json::exception& e) {
    throw LoadError(source + ": corrupt checkpoint (" + e.what() + ")");
  } catch (const DimensionError& e) {
    throw LoadError(source + ": corrupt checkpoint (" + e.what() + ")");
  } catch (const ConfigError& e) {
    throw LoadError(source + ": corrupt checkpoint (" + e.what() + ")");
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::string text = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write checkpoint " + path.string());
  out << text;
  if (!out) throw LoadError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str(), path.string());
}

}  // namespace wgcn
