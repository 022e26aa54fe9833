// SPDX-License-Identifier: Apache-2.0
#include "rei/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <numeric>
#include <sstream>

#include "rei/checkpoint_file.hpp"
#include "rei/errors.hpp"
#include "rei/metrics.hpp"
#include "rei/rng.hpp"

namespace rei {

std::string to_string(Task task) {
  switch (task) {
    case Task::mri: return "mri";
    case Task::inpaint: return "inpaint";
    case Task::ct: return "ct";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "mri") return Task::mri;
  if (name == "inpaint") return Task::inpaint;
  if (name == "ct") return Task::ct;
  throw ConfigError("unknown task '" + name + "' (expected mri, inpaint or ct)");
}

void adam_step(AdamState& s, Tensor& params, const Tensor& grads, double lr, double weight_decay) {
  require_same_shape(grads, params, "adam gradient");
  if (s.m.size() != params.size() || s.v.size() != params.size())
    throw ShapeError("adam: moment buffers do not match the parameter count");
  s.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i] + weight_decay * params[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

TrainConfig TrainConfig::preset(Task task) {
  TrainConfig c;
  switch (task) {
    case Task::mri:
      c.lr0 = 5e-4;
      c.batch_size = 2;
      c.epochs = 500;
      c.decay_points = {300};
      break;
    case Task::inpaint:
      c.lr0 = 1e-4;
      c.batch_size = 1;
      c.epochs = 500;
      c.decay_points = {100, 200, 300, 400};
      break;
    case Task::ct:
      c.lr0 = 5e-4;
      c.batch_size = 2;
      c.epochs = 3000;
      c.decay_points = {1000, 2000};
      c.loss.alpha = 1000.0;
      c.loss.tau = 10.0;
      c.loss.sure_scale = 1e-5;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(lr0 >= 0.0)) throw ConfigError("train.lr0 must be >= 0");
  if (!(decay_factor > 0.0)) throw ConfigError("train.decay_factor must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("train.grad_clip must be >= 0");
  if (threads == 0) throw ConfigError("train.threads must be >= 1");
  loss.validate();
}

double TrainConfig::lr(std::size_t epoch) const {
  const auto passed = std::count_if(decay_points.begin(), decay_points.end(), [&](std::size_t p) { return p <= epoch; });
  return lr0 * std::pow(decay_factor, static_cast<double>(passed));
}

nlohmann::json to_json(const TrainConfig& c) {
  return {
      {"epochs", c.epochs},
      {"batch_size", c.batch_size},
      {"lr0", c.lr0},
      {"decay_points", c.decay_points},
      {"decay_factor", c.decay_factor},
      {"weight_decay", c.weight_decay},
      {"seed", c.seed},
      {"grad_clip", c.grad_clip},
      {"checkpoint_every", c.checkpoint_every},
      {"loss",
       {{"variant", to_string(c.loss.variant)},
        {"alpha", c.loss.alpha},
        {"tau", c.loss.tau},
        {"sure_scale", c.loss.sure_scale}}},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("epochs", c.epochs);
  get("batch_size", c.batch_size);
  get("lr0", c.lr0);
  get("decay_points", c.decay_points);
  get("decay_factor", c.decay_factor);
  get("weight_decay", c.weight_decay);
  get("seed", c.seed);
  get("grad_clip", c.grad_clip);
  get("checkpoint_every", c.checkpoint_every);
  if (j.contains("loss")) {
    const auto& l = j.at("loss");
    if (l.contains("variant")) c.loss.variant = parse_variant(l.at("variant").get<std::string>());
    if (l.contains("alpha")) l.at("alpha").get_to(c.loss.alpha);
    if (l.contains("tau")) l.at("tau").get_to(c.loss.tau);
    if (l.contains("sure_scale")) l.at("sure_scale").get_to(c.loss.sure_scale);
  }
  return c;
}

nlohmann::json to_json(const ModelSpec& s) {
  return {{"in_channels", s.in_channels},
          {"width", s.width},
          {"depth", s.depth},
          {"convs_per_level", s.convs_per_level},
          {"residual", s.residual}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j, ModelSpec s) {
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("in_channels", s.in_channels);
  get("width", s.width);
  get("depth", s.depth);
  get("convs_per_level", s.convs_per_level);
  get("residual", s.residual);
  return s;
}

namespace {

nlohmann::json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

double parse_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json terms = nlohmann::json::object();
  for (const auto& [k, v] : e.terms) terms[k] = number_or_inf(v);
  nlohmann::json j = {{"epoch", e.epoch}, {"lr", e.lr}, {"terms", terms}};
  if (e.test_psnr) j["test_psnr"] = number_or_inf(*e.test_psnr);
  return j;
}

EpochLog epoch_log_from_json(const nlohmann::json& j) {
  EpochLog e;
  j.at("epoch").get_to(e.epoch);
  j.at("lr").get_to(e.lr);
  for (const auto& [k, v] : j.at("terms").items()) e.terms[k] = parse_number(v);
  if (j.contains("test_psnr")) e.test_psnr = parse_number(j.at("test_psnr"));
  return e;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  const std::size_t n = c.params.size();
  if (c.adam.m.size() != n || c.adam.v.size() != n) throw ShapeError("checkpoint: optimizer state size mismatch");
  nlohmann::json history = nlohmann::json::array();
  for (const auto& e : c.history) history.push_back(to_json(e));
  const nlohmann::json header = {
      {"model", to_json(c.spec)},
      {"param_count", n},
      {"seed", c.config.seed},
      {"epoch", c.epoch},
      {"adam", {{"t", c.adam.t}, {"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
      {"config", to_json(c.config)},
      {"history", history},
  };
  std::vector<double> payload;
  payload.reserve(3 * n);
  for (const Tensor* t : {&c.params, &c.adam.m, &c.adam.v}) payload.insert(payload.end(), t->vec().begin(), t->vec().end());
  write_checkpoint_file(path, header, payload);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  CheckpointBlob blob = read_checkpoint_file(path);
  Checkpoint c;
  try {
    const auto& h = blob.header;
    c.spec = model_spec_from_json(h.at("model"));
    const auto n = h.at("param_count").get<std::size_t>();
    if (n != parameter_count(c.spec)) throw FormatError("checkpoint: param_count does not match the model spec");
    if (blob.payload.size() != 3 * n) throw FormatError("checkpoint: payload size does not match param_count");
    c.epoch = h.at("epoch").get<std::size_t>();
    c.config = train_config_from_json(h.at("config"));
    const auto& a = h.at("adam");
    c.adam = AdamState(n);
    a.at("t").get_to(c.adam.t);
    a.at("beta1").get_to(c.adam.beta1);
    a.at("beta2").get_to(c.adam.beta2);
    a.at("eps").get_to(c.adam.eps);
    const auto slice = [&](std::size_t k) {
      return Tensor(Tensor::Shape{n}, std::vector<double>(blob.payload.begin() + static_cast<long>(k * n),
                                                          blob.payload.begin() + static_cast<long>((k + 1) * n)));
    };
    c.params = slice(0);
    c.adam.m = slice(1);
    c.adam.v = slice(2);
    if (h.contains("history"))
      for (const auto& e : h.at("history")) c.history.push_back(epoch_log_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  return c;
}

double evaluate_psnr(const ReconModel& model, const ForwardOperator& op, const std::vector<EvalItem>& items,
                     bool magnitude) {
  std::vector<double> values;
  values.reserve(items.size());
  for (const auto& it : items) {
    const Tensor xhat = model.apply(op.pinv(it.y));
    values.push_back(magnitude ? psnr_magnitude(xhat, it.x) : psnr(xhat, it.x));
  }
  return mean_std(values).mean;
}

Trainer::Trainer(TrainConfig cfg, ReconModel model, TrainProblem problem, std::vector<TrainItem> train,
                 std::vector<EvalItem> test)
    : cfg_(std::move(cfg)),
      model_(std::move(model)),
      problem_(problem),
      train_(std::move(train)),
      test_(std::move(test)),
      adam_(model_.param_count()) {
  cfg_.validate();
  if (train_.empty()) throw ConfigError("training set is empty");
  const Variant v = cfg_.loss.variant;
  for (const auto& it : train_) {
    if (needs_ground_truth(v) && !it.x) throw ConfigError("variant " + to_string(v) + " needs ground-truth images");
    if (needs_clean_measurements(v) && !it.u)
      throw ConfigError("variant " + to_string(v) + " needs clean measurements");
  }
}

void Trainer::restore(const Checkpoint& c) {
  if (!(c.spec == model_.spec())) throw ConfigError("checkpoint model spec differs from the configured model");
  model_ = ReconModel(c.spec, c.params);
  adam_ = c.adam;
  epoch_ = c.epoch;
  history_ = c.history;
}

Checkpoint Trainer::checkpoint() const {
  return Checkpoint{model_.spec(), model_.params(), adam_, epoch_, cfg_, history_};
}

Trainer::ItemResult Trainer::evaluate_item(std::size_t index) const {
  const TrainItem& item = train_[index];
  Tape tape;
  Var params = tape.leaf(model_.params());
  const ForwardOperator& op = problem_.op;
  const ReconFn f = [&](Var y) { return model_.apply(params, pinv_op(op, y)); };
  const LossSample sample{item.y, item.x, item.u};
  const LossSetup setup{op, problem_.group, problem_.noise};
  LossResult res = variant_loss(tape, cfg_.loss, sample, f, setup, DrawKey{cfg_.seed, index, epoch_});
  ItemResult r;
  r.terms = std::move(res.terms);
  r.finite = std::isfinite(res.total.value().item());
  if (!r.finite) return r;
  r.grad = tape.backward(res.total).wrt(params);
  r.finite = all_finite(r.grad);
  return r;
}

void Trainer::abort_non_finite(std::size_t index, const ItemResult& r) const {
  std::ostringstream msg;
  msg << "non-finite loss or gradient at epoch " << epoch_ << ", item " << index << " (";
  bool first = true;
  for (const auto& [k, v] : r.terms) {
    msg << (first ? "" : ", ") << k << "=" << v;
    first = false;
  }
  msg << ")";
  const auto dir = cfg_.checkpoint_dir.empty() ? std::filesystem::temp_directory_path() : cfg_.checkpoint_dir;
  const auto snapshot = dir / "nan_snapshot.reic";
  try {
    save_checkpoint(snapshot, checkpoint());
    msg << "; state before the step saved to " << snapshot.string();
  } catch (const std::exception& e) {
    msg << "; snapshot failed: " << e.what();
  }
  throw TrainingError(msg.str());
}

EpochLog Trainer::run_epoch() {
  const std::size_t n = train_.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream shuffle(cfg_.seed, {0, epoch_, Purpose::shuffle});
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

  EpochLog log;
  log.epoch = epoch_;
  log.lr = cfg_.lr(epoch_);
  std::map<std::string, double> sums;

  for (std::size_t start = 0; start < n; start += cfg_.batch_size) {
    const std::size_t stop = std::min(n, start + cfg_.batch_size);
    std::vector<ItemResult> results(stop - start);
    if (cfg_.threads > 1 && results.size() > 1) {
      for (std::size_t chunk = start; chunk < stop; chunk += cfg_.threads) {
        std::vector<std::future<ItemResult>> jobs;
        for (std::size_t k = chunk; k < std::min(stop, chunk + cfg_.threads); ++k)
          jobs.push_back(std::async(std::launch::async, [this, idx = order[k]] { return evaluate_item(idx); }));
        for (std::size_t k = 0; k < jobs.size(); ++k) results[chunk - start + k] = jobs[k].get();
      }
    } else {
      for (std::size_t k = start; k < stop; ++k) results[k - start] = evaluate_item(order[k]);
    }

    Tensor grad(Tensor::Shape{model_.param_count()});
    for (std::size_t k = 0; k < results.size(); ++k) {
      const ItemResult& r = results[k];
      if (!r.finite) abort_non_finite(order[start + k], r);
      grad = grad + r.grad;
      for (const auto& [name, v] : r.terms) sums[name] += v;
    }
    grad = (1.0 / static_cast<double>(results.size())) * grad;
    if (cfg_.grad_clip > 0.0) {
      const double gn = norm(grad);
      if (gn > cfg_.grad_clip) grad = (cfg_.grad_clip / gn) * grad;
    }
    adam_step(adam_, model_.params(), grad, log.lr, cfg_.weight_decay);
  }
  for (const auto& [name, s] : sums) log.terms[name] = s / static_cast<double>(n);
  if (!test_.empty()) log.test_psnr = evaluate_psnr(model_, problem_.op, test_, problem_.magnitude_psnr);

  ++epoch_;
  history_.push_back(log);
  if (!cfg_.checkpoint_dir.empty() && cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0)
    save_checkpoint(cfg_.checkpoint_dir / ("epoch_" + std::to_string(epoch_) + ".reic"), checkpoint());
  return log;
}

void Trainer::run(std::optional<std::size_t> until, const EpochCallback& on_epoch) {
  const std::size_t target = until.value_or(cfg_.epochs);
  while (epoch_ < target) {
    const EpochLog log = run_epoch();
    if (on_epoch) on_epoch(log);
  }
  if (!cfg_.checkpoint_dir.empty() && epoch_ >= cfg_.epochs)
    save_checkpoint(cfg_.checkpoint_dir / "final.reic", checkpoint());
}

}  // namespace rei
