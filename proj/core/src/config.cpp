// SPDX-License-Identifier: Apache-2.0
#include "rei/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "rei/errors.hpp"

namespace rei {

namespace {

using json = nlohmann::json;

// Reads one JSON object, recording problems instead of throwing so that a
// single pass reports every mistake in the file.
class Section {
 public:
  Section(const json& root, std::string name, std::vector<std::string>& errors)
      : name_(std::move(name)), errors_(errors) {
    if (!root.contains(name_)) return;
    const json& j = root.at(name_);
    if (!j.is_object()) {
      fail("", "must be an object");
      return;
    }
    j_ = &j;
  }

  bool present() const { return j_ != nullptr; }
  bool has(const char* key) const { return j_ && j_->contains(key); }

  template <class T>
  bool get(const char* key, T& out) {
    if (!has(key)) return false;
    try {
      out = j_->at(key).get<T>();
      return true;
    } catch (const json::exception&) {
      fail(key, "has the wrong type");
      return false;
    }
  }

  void require(bool ok, const char* key, const std::string& rule) {
    if (!ok) fail(key, rule);
  }

  void allow_only(std::initializer_list<const char*> keys) {
    if (!j_) return;
    for (const auto& [k, v] : j_->items())
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) fail(k, "is not a known key");
  }

  void fail(const std::string& key, const std::string& why) {
    errors_.push_back(key.empty() ? name_ + " " + why : name_ + "." + key + " " + why);
  }

 private:
  std::string name_;
  std::vector<std::string>& errors_;
  const json* j_ = nullptr;
};

template <class F>
void collect(std::vector<std::string>& errors, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults(Task task) {
  ExperimentConfig c;
  c.task = task;
  c.train = TrainConfig::preset(task);
  switch (task) {
    case Task::inpaint:
      c.noise = NoiseParams::poisson(0.1);
      c.group_kind = GroupKind::shift2d;
      c.variants = {Variant::REI, Variant::EI, Variant::MC};
      c.model.in_channels = 1;
      break;
    case Task::mri:
      c.noise = NoiseParams::gaussian(0.05);
      c.group_kind = GroupKind::rotate;
      c.variants = {Variant::REI, Variant::EI, Variant::MC};
      c.model.in_channels = 2;
      break;
    case Task::ct:
      c.noise = NoiseParams::mpg(1.0, 30.0);
      c.group_kind = GroupKind::rotate;
      c.variants = {Variant::REI, Variant::EI};
      c.model.in_channels = 1;
      c.op.pixel_size = 0.1;
      break;
  }
  return c;
}

ExperimentConfig parse_experiment_config(const json& j) {
  std::vector<std::string> errors;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [k, v] : j.items()) {
    static const std::set<std::string> sections = {"task", "seed",  "operator", "noise", "group",
                                                   "loss", "train", "data",     "model", "output"};
    if (!sections.contains(k)) errors.push_back("unknown section '" + k + "'");
  }

  Task task = Task::inpaint;
  if (!j.contains("task")) {
    errors.push_back("task is required (mri, inpaint or ct)");
  } else {
    collect(errors, [&] { task = parse_task(j.at("task").get<std::string>()); });
  }
  ExperimentConfig c = ExperimentConfig::defaults(task);
  if (j.contains("seed")) collect(errors, [&] { c.seed = j.at("seed").get<std::uint64_t>(); });

  Section op(j, "operator", errors);
  op.allow_only({"side", "channels", "kept_fraction", "acceleration", "center_fraction", "views", "i0", "pixel_size"});
  op.get("side", c.op.side);
  op.get("channels", c.op.channels);
  op.get("kept_fraction", c.op.kept_fraction);
  op.get("acceleration", c.op.acceleration);
  op.get("center_fraction", c.op.center_fraction);
  op.get("views", c.op.views);
  op.get("i0", c.op.i0);
  op.get("pixel_size", c.op.pixel_size);
  op.require(c.op.side >= 4, "side", "must be >= 4");
  op.require(c.op.kept_fraction > 0.0 && c.op.kept_fraction <= 1.0, "kept_fraction", "must lie in (0,1]");
  op.require(c.op.acceleration >= 1.0, "acceleration", "must be >= 1");
  op.require(c.op.center_fraction >= 0.0 && c.op.center_fraction <= 1.0, "center_fraction", "must lie in [0,1]");
  op.require(c.op.views >= 1, "views", "must be >= 1");
  op.require(c.op.i0 > 0.0, "i0", "must be > 0");
  op.require(c.op.pixel_size > 0.0, "pixel_size", "must be > 0");
  if (task == Task::inpaint) op.require(c.op.channels == 1 || c.op.channels == 3, "channels", "must be 1 or 3");

  Section noise(j, "noise", errors);
  noise.allow_only({"kind", "sigma", "gamma"});
  std::string kind;
  if (noise.get("kind", kind)) collect(errors, [&] { c.noise.kind = parse_noise_kind(kind); });
  if (noise.present() && noise.has("kind")) {
    c.noise.sigma = 0.0;
    c.noise.gamma = 0.0;
  }
  noise.get("sigma", c.noise.sigma);
  noise.get("gamma", c.noise.gamma);
  collect(errors, [&] { c.noise.validate(); });
  if (task == Task::mri && c.noise.kind != NoiseKind::gaussian)
    errors.push_back("noise.kind must be gaussian for mri (k-space data can be negative)");

  Section group(j, "group", errors);
  group.allow_only({"kind", "order"});
  std::string gk;
  if (group.get("kind", gk)) collect(errors, [&] { c.group_kind = parse_group_kind(gk); });
  group.get("order", c.group_order);

  Section loss(j, "loss", errors);
  loss.allow_only({"variants", "alpha", "tau", "sure_scale"});
  std::vector<std::string> names;
  if (loss.get("variants", names)) {
    c.variants.clear();
    for (const auto& n : names) collect(errors, [&] { c.variants.push_back(parse_variant(n)); });
    loss.require(!names.empty(), "variants", "must not be empty");
    std::set<std::string> unique(names.begin(), names.end());
    loss.require(unique.size() == names.size(), "variants", "must not repeat a variant");
  }
  loss.get("alpha", c.train.loss.alpha);
  loss.get("tau", c.train.loss.tau);
  loss.get("sure_scale", c.train.loss.sure_scale);
  loss.require(c.train.loss.alpha >= 0.0, "alpha", "must be >= 0");
  loss.require(c.train.loss.tau > 0.0, "tau", "must be > 0");
  loss.require(c.train.loss.sure_scale > 0.0, "sure_scale", "must be > 0");

  Section train(j, "train", errors);
  train.allow_only({"epochs", "batch_size", "lr0", "decay_points", "decay_factor", "weight_decay", "grad_clip",
                    "checkpoint_every", "threads"});
  train.get("epochs", c.train.epochs);
  train.get("batch_size", c.train.batch_size);
  train.get("lr0", c.train.lr0);
  train.get("decay_points", c.train.decay_points);
  train.get("decay_factor", c.train.decay_factor);
  train.get("weight_decay", c.train.weight_decay);
  train.get("grad_clip", c.train.grad_clip);
  train.get("checkpoint_every", c.train.checkpoint_every);
  train.get("threads", c.train.threads);
  train.require(c.train.epochs >= 1, "epochs", "must be >= 1");
  train.require(c.train.batch_size >= 1, "batch_size", "must be >= 1");
  train.require(c.train.lr0 >= 0.0, "lr0", "must be >= 0");
  train.require(c.train.decay_factor > 0.0, "decay_factor", "must be > 0");
  train.require(c.train.weight_decay >= 0.0, "weight_decay", "must be >= 0");
  train.require(c.train.grad_clip >= 0.0, "grad_clip", "must be >= 0");
  train.require(c.train.threads >= 1, "threads", "must be >= 1");
  c.train.seed = c.seed;

  Section data(j, "data", errors);
  data.allow_only({"source", "train_count", "test_count"});
  data.get("source", c.data.source);
  data.get("train_count", c.data.train_count);
  data.get("test_count", c.data.test_count);
  data.require(c.data.train_count >= 1, "train_count", "must be >= 1");
  if (c.data.source != "synthetic") {
    std::error_code ec;
    data.require(std::filesystem::is_directory(c.data.source, ec), "source",
                 "must be \"synthetic\" or an existing directory");
  }

  Section model(j, "model", errors);
  model.allow_only({"width", "depth", "convs_per_level", "residual"});
  model.get("width", c.model.width);
  model.get("depth", c.model.depth);
  model.get("convs_per_level", c.model.convs_per_level);
  model.get("residual", c.model.residual);
  model.require(c.model.width >= 1 && c.model.width <= 64, "width", "must lie in [1,64]");
  model.require(c.model.depth <= 4, "depth", "must be <= 4");
  model.require(c.model.convs_per_level >= 1, "convs_per_level", "must be >= 1");
  c.model.in_channels = task == Task::mri ? 2 : (task == Task::ct ? 1 : c.op.channels);
  if (c.model.depth <= 4 && c.op.side % (std::size_t{1} << c.model.depth) != 0)
    errors.push_back("operator.side must be divisible by 2^model.depth");

  Section output(j, "output", errors);
  output.allow_only({"dir", "save_images"});
  std::string dir;
  if (output.get("dir", dir)) c.output.dir = dir;
  output.get("save_images", c.output.save_images);

  if (c.group_kind == GroupKind::shift2d && c.group_order != 0 && c.group_order != c.op.side * c.op.side)
    errors.push_back("group.order must be side*side for shift2d (or omitted)");

  if (!errors.empty()) {
    std::ostringstream msg;
    msg << "invalid experiment config:";
    for (const auto& e : errors) msg << "\n  - " << e;
    throw ConfigError(msg.str());
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& c) {
  json variants = json::array();
  for (Variant v : c.variants) variants.push_back(to_string(v));
  json train = to_json(c.train);
  train.erase("loss");
  train.erase("seed");
  train["threads"] = c.train.threads;
  json model = to_json(c.model);
  model.erase("in_channels");
  return {
      {"task", to_string(c.task)},
      {"seed", c.seed},
      {"operator",
       {{"side", c.op.side},
        {"channels", c.op.channels},
        {"kept_fraction", c.op.kept_fraction},
        {"acceleration", c.op.acceleration},
        {"center_fraction", c.op.center_fraction},
        {"views", c.op.views},
        {"i0", c.op.i0},
        {"pixel_size", c.op.pixel_size}}},
      {"noise", {{"kind", to_string(c.noise.kind)}, {"sigma", c.noise.sigma}, {"gamma", c.noise.gamma}}},
      {"group", {{"kind", to_string(c.group_kind)}, {"order", c.group_order}}},
      {"loss",
       {{"variants", variants},
        {"alpha", c.train.loss.alpha},
        {"tau", c.train.loss.tau},
        {"sure_scale", c.train.loss.sure_scale}}},
      {"train", train},
      {"data", {{"source", c.data.source}, {"train_count", c.data.train_count}, {"test_count", c.data.test_count}}},
      {"model", model},
      {"output", {{"dir", c.output.dir.string()}, {"save_images", c.output.save_images}}},
  };
}

std::unique_ptr<ForwardOperator> make_operator(const ExperimentConfig& c) {
  const std::size_t s = c.op.side;
  switch (c.task) {
    case Task::inpaint:
      return std::make_unique<InpaintOp>(InpaintOp::random(c.op.channels, s, s, c.op.kept_fraction, c.seed));
    case Task::mri:
      return std::make_unique<MriOp>(MriOp::cartesian(s, s, c.op.acceleration, c.op.center_fraction, c.seed));
    case Task::ct:
      return std::make_unique<CtOp>(RadonSpec{c.op.views, s, c.op.pixel_size}, c.op.i0);
  }
  throw ConfigError("unknown task");
}

TransformGroup make_group(const ExperimentConfig& c) {
  return TransformGroup(c.group_kind, c.op.side, c.op.side, c.group_order);
}

Dataset make_dataset(const ExperimentConfig& c) {
  const std::size_t channels = c.task == Task::inpaint ? c.op.channels : 1;
  if (c.data.source == "synthetic")
    return synthetic_dataset(c.data.train_count, c.data.test_count, c.op.side, c.seed, channels);
  return load_dataset(c.data.source, c.op.side, c.data.train_count, c.data.test_count, channels);
}

}  // namespace rei
