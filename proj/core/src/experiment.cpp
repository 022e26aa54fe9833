// SPDX-License-Identifier: Apache-2.0
#include "rei/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "rei/errors.hpp"
#include "rei/image_io.hpp"

namespace fs = std::filesystem;

namespace rei {

namespace {

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  return out;
}

std::vector<double> per_image_psnr(const ReconModel* model, const ForwardOperator& op, const std::vector<EvalItem>& items,
                                   bool magnitude) {
  std::vector<double> out;
  for (const auto& it : items) {
    Tensor xhat = op.pinv(it.y);
    if (model) xhat = model->apply(xhat);
    out.push_back(magnitude ? psnr_magnitude(xhat, it.x) : psnr(xhat, it.x));
  }
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

const MethodResult& ExperimentReport::method(const std::string& name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw std::out_of_range("report has no method '" + name + "'");
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& text) {
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw FormatError("not a number: '" + text + "'");
  return v;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  const auto log = [&](const std::string& s) {
    if (opts.log) opts.log(s);
  };
  ExperimentReport report;
  report.config = cfg;

  const auto op = make_operator(cfg);
  const TransformGroup group = make_group(cfg);
  const Dataset data = make_dataset(cfg);
  const MeasuredSplit split = simulate_measurements(data, *op, cfg.noise, cfg.seed);
  const bool magnitude = cfg.task == Task::mri;

  MethodResult base{"pinv", per_image_psnr(nullptr, *op, split.test, magnitude), {}, {}, std::nullopt};
  base.stats = mean_std(base.psnr);
  log("pinv: test PSNR " + format_number(base.stats.mean));
  report.methods.push_back(std::move(base));

  for (Variant v : cfg.variants) {
    TrainConfig tc = cfg.train;
    tc.loss.variant = v;
    tc.seed = cfg.seed;
    if (opts.epoch_limit > 0) tc.epochs = std::min(tc.epochs, opts.epoch_limit);
    if (!opts.checkpoint_root.empty()) tc.checkpoint_dir = opts.checkpoint_root / to_string(v);
    Trainer trainer(tc, ReconModel::initialized(cfg.model, cfg.seed), TrainProblem{*op, group, cfg.noise, magnitude},
                    split.train, split.test);
    const std::string name = to_string(v);
    trainer.run(std::nullopt, [&](const EpochLog& e) {
      if ((e.epoch + 1) % 10 != 0 && e.epoch + 1 != tc.epochs) return;
      std::ostringstream line;
      line << name << " epoch " << e.epoch + 1 << "/" << tc.epochs;
      for (const auto& [k, val] : e.terms) line << " " << k << "=" << val;
      if (e.test_psnr) line << " psnr=" << *e.test_psnr;
      log(line.str());
    });
    MethodResult r{name, per_image_psnr(&trainer.model(), *op, split.test, magnitude), {}, trainer.history(),
                   trainer.model()};
    r.stats = mean_std(r.psnr);
    log(name + ": test PSNR " + format_number(r.stats.mean));
    report.methods.push_back(std::move(r));
  }
  report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_report(const ExperimentReport& report, const fs::path& dir) {
  {
    auto out = open_out(dir / "report.csv");
    out << "method,mean_psnr,std_psnr,count\n";
    for (const auto& m : report.methods)
      out << m.method << "," << format_number(m.stats.mean) << "," << format_number(m.stats.std) << ","
          << m.psnr.size() << "\n";
  }
  {
    auto out = open_out(dir / "per_image.csv");
    out << "method,image,psnr\n";
    for (const auto& m : report.methods)
      for (std::size_t i = 0; i < m.psnr.size(); ++i) out << m.method << "," << i << "," << format_number(m.psnr[i]) << "\n";
  }
  for (const auto& m : report.methods) {
    if (m.history.empty()) continue;
    std::set<std::string> names;
    for (const auto& e : m.history)
      for (const auto& [k, v] : e.terms) names.insert(k);
    auto out = open_out(dir / ("metrics_" + m.method + ".csv"));
    out << "epoch,lr";
    for (const auto& n : names) out << "," << n;
    out << ",test_psnr\n";
    for (const auto& e : m.history) {
      out << e.epoch << "," << format_number(e.lr);
      for (const auto& n : names) {
        const auto it = e.terms.find(n);
        out << "," << (it == e.terms.end() ? "" : format_number(it->second));
      }
      out << "," << (e.test_psnr ? format_number(*e.test_psnr) : "") << "\n";
    }
  }
  auto out = open_out(dir / "report.json");
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : report.methods)
    methods.push_back({{"method", m.method}, {"mean_psnr", format_number(m.stats.mean)},
                       {"std_psnr", format_number(m.stats.std)}});
  out << nlohmann::json{{"config", to_json(report.config)},
                        {"methods", methods},
                        {"runtime_seconds", report.runtime_seconds}}
             .dump(2)
      << "\n";
}

void write_reconstructions(const ExperimentReport& report, const fs::path& dir) {
  const ExperimentConfig& cfg = report.config;
  const auto op = make_operator(cfg);
  const Dataset data = make_dataset(cfg);
  const MeasuredSplit split = simulate_measurements(data, *op, cfg.noise, cfg.seed);
  for (const auto& m : report.methods) {
    for (std::size_t i = 0; i < split.test.size(); ++i) {
      Tensor xhat = op->pinv(split.test[i].y);
      if (m.model) xhat = m.model->apply(xhat);
      if (cfg.task == Task::mri) xhat = magnitude(xhat);
      const std::string stem = "test_" + std::to_string(i);
      if (xhat.dim(0) == 3)
        write_png(dir / "recon" / m.method / (stem + ".png"), xhat);
      else
        write_pgm(dir / "recon" / m.method / (stem + ".pgm"), xhat);
    }
  }
  if (cfg.task == Task::inpaint) write_pgm(dir / "mask.pgm", dynamic_cast<const InpaintOp&>(*op).mask());
  if (cfg.task == Task::mri) write_pgm(dir / "mask.pgm", dynamic_cast<const MriOp&>(*op).mask());
}

ExperimentReport run_experiment(const fs::path& config_path, const RunOptions& opts) {
  const ExperimentConfig cfg = load_experiment_config(config_path);
  RunOptions o = opts;
  if (o.checkpoint_root.empty()) o.checkpoint_root = cfg.output.dir / "checkpoints";
  ExperimentReport report = run_experiment(cfg, o);
  write_report(report, cfg.output.dir);
  if (cfg.output.save_images) write_reconstructions(report, cfg.output.dir);
  return report;
}

std::vector<FigureRow> emit_figure_data(const std::vector<SweepPoint>& sweep) {
  std::vector<FigureRow> rows;
  std::set<std::string> reference;
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    std::set<std::string> names;
    for (const auto& m : sweep[k].report.methods) {
      names.insert(m.method);
      rows.push_back({m.method, sweep[k].level, m.stats.mean, m.stats.std});
    }
    if (k == 0) reference = names;
    if (names != reference) throw ConfigError("sweep reports disagree on the set of methods");
  }
  std::set<std::pair<std::string, double>> seen;
  for (const auto& r : rows)
    if (!seen.insert({r.method, r.level}).second)
      throw ConfigError("sweep grid repeats level " + format_number(r.level) + " for " + r.method);
  std::sort(rows.begin(), rows.end(), [](const FigureRow& a, const FigureRow& b) {
    return a.method != b.method ? a.method < b.method : a.level < b.level;
  });
  return rows;
}

std::string figure_csv(const std::vector<FigureRow>& rows) {
  std::ostringstream out;
  out << "method,noise_level,mean,std\n";
  for (const auto& r : rows)
    out << r.method << "," << format_number(r.level) << "," << format_number(r.mean) << "," << format_number(r.std)
        << "\n";
  return out.str();
}

std::vector<FigureRow> parse_figure_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "method,noise_level,mean,std")
    throw FormatError("figure CSV: unexpected header");
  std::vector<FigureRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw FormatError("figure CSV: expected 4 fields in '" + line + "'");
    rows.push_back({cells[0], parse_number(cells[1]), parse_number(cells[2]), parse_number(cells[3])});
  }
  return rows;
}

ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& param, double value) {
  ExperimentConfig c = cfg;
  if (param == "sigma") {
    c.noise.sigma = value;
  } else if (param == "gamma") {
    c.noise.gamma = value;
  } else if (param == "alpha") {
    c.train.loss.alpha = value;
  } else if (param == "tau") {
    c.train.loss.tau = value;
  } else if (param == "i0") {
    c.op.i0 = value;
  } else {
    throw ConfigError("cannot sweep '" + param + "' (expected sigma, gamma, alpha, tau or i0)");
  }
  c.noise.validate();
  c.train.validate();
  return c;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& cfg, const std::string& param,
                                  const std::vector<double>& values, const RunOptions& opts) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<SweepPoint> points;
  for (double v : values) {
    ExperimentConfig c = with_parameter(cfg, param, v);
    c.output.dir = cfg.output.dir / (param + "_" + format_number(v));
    RunOptions o = opts;
    o.checkpoint_root = c.output.dir / "checkpoints";
    SweepPoint p{v, run_experiment(c, o)};
    write_report(p.report, c.output.dir);
    if (c.output.save_images) write_reconstructions(p.report, c.output.dir);
    points.push_back(std::move(p));
  }
  auto out = open_out(cfg.output.dir / ("figure_" + param + ".csv"));
  out << figure_csv(emit_figure_data(points));
  return points;
}

}  // namespace rei
