// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rei/config.hpp"
#include "rei/dataset.hpp"
#include "rei/errors.hpp"
#include "rei/experiment.hpp"
#include "rei/image_io.hpp"
#include "rei/metrics.hpp"
#include "test_support.hpp"

using namespace rei;
using nlohmann::json;
using rei::test::randu;
using rei::test::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Independent bilinear resampler: centres at (i + 0.5)·in/out − 0.5, clamped.
Tensor bilinear_oracle(const Tensor& img, std::size_t out) {
  const std::size_t n = img.dim(0);
  auto axis = [&](std::size_t i, std::size_t& a, std::size_t& b, double& t) {
    double s = (i + 0.5) * static_cast<double>(n) / static_cast<double>(out) - 0.5;
    s = std::min(std::max(s, 0.0), static_cast<double>(n - 1));
    a = static_cast<std::size_t>(std::floor(s));
    b = std::min(a + 1, n - 1);
    t = s - static_cast<double>(a);
  };
  Tensor r({out, out});
  for (std::size_t i = 0; i < out; ++i)
    for (std::size_t j = 0; j < out; ++j) {
      std::size_t i0, i1, j0, j1;
      double ti, tj;
      axis(i, i0, i1, ti);
      axis(j, j0, j1, tj);
      const double top = (1 - tj) * img[i0 * n + j0] + tj * img[i0 * n + j1];
      const double bot = (1 - tj) * img[i1 * n + j0] + tj * img[i1 * n + j1];
      r[i * out + j] = (1 - ti) * top + ti * bot;
    }
  return r;
}

json small_config(const std::string& out_dir) {
  return json{{"task", "inpaint"},
              {"seed", 4},
              {"operator", {{"side", 16}, {"kept_fraction", 0.7}}},
              {"noise", {{"kind", "poisson"}, {"gamma", 0.1}}},
              {"group", {{"kind", "shift2d"}}},
              {"loss", {{"variants", {"REI", "MC"}}}},
              {"train", {{"epochs", 2}, {"batch_size", 2}, {"lr0", 1e-3}}},
              {"data", {{"source", "synthetic"}, {"train_count", 4}, {"test_count", 2}}},
              {"model", {{"width", 4}, {"depth", 1}}},
              {"output", {{"dir", out_dir}}}};
}

}  // namespace

TEST(Psnr, Examples) {
  const Tensor x = randu({1, 4, 4}, 1);
  EXPECT_EQ(psnr(x, x), std::numeric_limits<double>::infinity());
  EXPECT_NEAR(psnr(x + Tensor({1, 4, 4}, 0.1), x), 20.0, 1e-12);
  EXPECT_NEAR(psnr(x + Tensor({1, 4, 4}, 0.1), x, 2.0), 20.0 + 20.0 * std::log10(2.0), 1e-12);
  EXPECT_THROW(psnr(x, Tensor({4, 4})), ShapeError);
}

TEST(Psnr, MatchesDirectFormula) {
  const Tensor a = randu({3, 7, 5}, 2), b = randu({3, 7, 5}, 3);
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double expected = -10.0 * std::log10(se / static_cast<double>(a.size()));
  EXPECT_NEAR(psnr(a, b), expected, 1e-10);
}

TEST(Psnr, MagnitudeImages) {
  Tensor z({2, 1, 2}, std::vector<double>{3, 0, 4, -1});
  const Tensor m = magnitude(z);
  EXPECT_EQ(m.shape(), (Tensor::Shape{1, 1, 2}));
  EXPECT_DOUBLE_EQ(m[0], 5.0);
  EXPECT_DOUBLE_EQ(m[1], 1.0);
  Tensor w = z;
  w[0] = -3.0;  // same magnitude
  EXPECT_EQ(psnr_magnitude(w, z), std::numeric_limits<double>::infinity());
}

TEST(Psnr, MeanStd) {
  const std::vector<double> v{1, 2, 3, 4};
  const MeanStd s = mean_std(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(mean_std(std::vector<double>{7}).std, 0.0);
  const MeanStd inf = mean_std(std::vector<double>{1, std::numeric_limits<double>::infinity()});
  EXPECT_TRUE(std::isinf(inf.mean));
  EXPECT_EQ(inf.std, 0.0);
}

TEST(Dataset, ConstantImageStaysConstant) {
  TempDir dir("const");
  write_pgm(dir.path() / "a.pgm", Tensor({20, 30}, 128.0 / 255.0));
  const Dataset d = load_dataset(dir.path(), 12);
  ASSERT_EQ(d.images.size(), 1u);
  const Tensor& x = d.images[0];
  EXPECT_EQ(x.shape(), (Tensor::Shape{1, 12, 12}));
  for (double v : x.data()) EXPECT_EQ(v, x[0]);
  EXPECT_NEAR(x[0], 128.0 / 255.0, 1e-15);
}

TEST(Dataset, ShapeContractAndSplit) {
  TempDir dir("shape");
  for (int i = 0; i < 3; ++i) write_raw(dir.path() / ("img" + std::to_string(i) + ".raw"), randu({512, 512}, 10 + i));
  const Dataset d = load_dataset(dir.path(), 64, 2, 1);
  ASSERT_EQ(d.images.size(), 3u);
  EXPECT_EQ(d.images[0].shape(), (Tensor::Shape{1, 64, 64}));
  EXPECT_EQ(d.train, (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(d.test, (std::vector<std::size_t>{2}));
  EXPECT_EQ(d.names[0], "img0.raw");
  EXPECT_THROW(load_dataset(dir.path(), 64, 4), ConfigError);
}

TEST(Dataset, CheckerboardMatchesReferenceResampler) {
  // 3-pixel checkerboard on a 90×60 canvas; the loader crops the central 60×60.
  Tensor board({90, 60});
  for (std::size_t i = 0; i < 90; ++i)
    for (std::size_t j = 0; j < 60; ++j) board[i * 60 + j] = ((i / 3 + j / 3) % 2) ? 0.9 : 0.1;
  TempDir dir("checker");
  write_raw(dir.path() / "board.f64", board);
  const Dataset d = load_dataset(dir.path(), 16);
  Tensor crop({60, 60});
  for (std::size_t i = 0; i < 60; ++i)
    for (std::size_t j = 0; j < 60; ++j) crop[i * 60 + j] = board[(i + 15) * 60 + j];
  const Tensor expected = bilinear_oracle(crop, 16);
  EXPECT_LT(max_abs_diff(d.images[0].reshaped({16, 16}), expected), 1e-9);
}

TEST(Dataset, Errors) {
  TempDir dir("empty");
  EXPECT_THROW(load_dataset(dir.path(), 8), FormatError);
  EXPECT_THROW(load_dataset(dir.path() / "missing", 8), FormatError);
  std::ofstream(dir.path() / "junk.pgm") << "P7 not a pgm";
  EXPECT_THROW(load_dataset(dir.path(), 8), FormatError);
}

TEST(Dataset, ImageFilesRoundTrip) {
  TempDir dir("io");
  const Tensor img = randu({5, 7}, 4);
  write_raw(dir.path() / "x.raw", img);
  EXPECT_TRUE(bitwise_equal(read_raw(dir.path() / "x.raw"), img));
  write_pgm(dir.path() / "x.pgm", img);
  EXPECT_LE(max_abs_diff(read_pgm(dir.path() / "x.pgm"), img), 0.5 / 255.0 + 1e-12);
  write_png(dir.path() / "x.png", img);
  EXPECT_LE(max_abs_diff(read_png(dir.path() / "x.png"), img), 0.5 / 255.0 + 1e-12);
}

TEST(Dataset, SyntheticAndMeasurementCache) {
  const Dataset d = synthetic_dataset(3, 2, 16, 9);
  ASSERT_EQ(d.images.size(), 5u);
  for (const Tensor& x : d.images)
    for (double v : x.data()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  const InpaintOp op = InpaintOp::random(1, 16, 16, 0.5, 2);
  const MeasuredSplit a = simulate_measurements(d, op, NoiseParams::poisson(0.1), 5);
  const MeasuredSplit b = simulate_measurements(d, op, NoiseParams::poisson(0.1), 5);
  ASSERT_EQ(a.train.size(), 3u);
  ASSERT_EQ(a.test.size(), 2u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(bitwise_equal(a.train[i].y, b.train[i].y));
  for (std::size_t i = 0; i < 64; ++i)
    if (op.mask()[i] == 0.0) { EXPECT_EQ(a.train[0].y[i], 0.0); }
}

TEST(Config, DefaultsAndRoundTrip) {
  const ExperimentConfig c = parse_experiment_config(small_config("x"));
  EXPECT_EQ(c.task, Task::inpaint);
  EXPECT_EQ(c.variants, (std::vector<Variant>{Variant::REI, Variant::MC}));
  EXPECT_EQ(c.op.side, 16u);
  const ExperimentConfig again = parse_experiment_config(to_json(c));
  EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, ListsEveryProblem) {
  json j = small_config("x");
  j["noise"] = {{"kind", "poisson"}, {"gamma", -1.0}};
  j["train"]["epochs"] = 0;
  j["loss"]["tau"] = 0.0;
  j["operator"]["colour"] = 1;
  try {
    parse_experiment_config(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"gamma", "epochs", "tau", "colour"})
      EXPECT_NE(msg.find(needle), std::string::npos) << needle << " missing from: " << msg;
  }
  EXPECT_THROW(parse_experiment_config(json{{"seed", 1}}), ConfigError);
  EXPECT_THROW(parse_experiment_config(json{{"task", "mri"}, {"noise", {{"kind", "poisson"}, {"gamma", 0.1}}}}),
               ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SweepParameters) {
  const ExperimentConfig c = parse_experiment_config(small_config("x"));
  EXPECT_EQ(with_parameter(c, "gamma", 0.3).noise.gamma, 0.3);
  EXPECT_EQ(with_parameter(c, "alpha", 2.0).train.loss.alpha, 2.0);
  EXPECT_THROW(with_parameter(c, "width", 2.0), ConfigError);
}

TEST(Figure, NumberFormatRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 20.0, std::numeric_limits<double>::denorm_min()})
    EXPECT_EQ(parse_number(format_number(v)), v);
  EXPECT_EQ(format_number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_TRUE(std::isinf(parse_number("inf")));
  EXPECT_TRUE(std::isnan(parse_number("nan")));
}

namespace {

ExperimentReport fake_report(std::vector<std::pair<std::string, double>> methods) {
  ExperimentReport r;
  for (auto& [name, mean] : methods) {
    MethodResult m;
    m.method = name;
    m.psnr = {mean - 1.0 / 3.0, mean + 1.0 / 3.0};
    m.stats = mean_std(m.psnr);
    r.methods.push_back(m);
  }
  return r;
}

}  // namespace

TEST(Figure, RowsSortedAndRoundTrip) {
  std::vector<SweepPoint> sweep;
  for (double s : {0.2, 0.01, 0.1}) sweep.push_back({s, fake_report({{"pinv", 10.0 - s}, {"REI", 20.0 - 7 * s}})});
  const auto rows = emit_figure_data(sweep);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].method, "REI");
  EXPECT_EQ(rows[0].level, 0.01);
  EXPECT_EQ(rows[2].level, 0.2);
  EXPECT_EQ(rows[3].method, "pinv");
  EXPECT_EQ(rows[5].mean, 10.0 - 0.2);
  EXPECT_EQ(parse_figure_csv(figure_csv(rows)), rows);

  const auto single = emit_figure_data({{0.1, fake_report({{"pinv", 1.0}, {"MC", 2.0}})}});
  EXPECT_EQ(single.size(), 2u);

  sweep.push_back({0.3, fake_report({{"pinv", 1.0}})});
  EXPECT_THROW(emit_figure_data(sweep), ConfigError);
}

TEST(Experiment, NoiselessFullMaskBaselineIsPerfect) {
  json j = small_config("x");
  j["operator"]["kept_fraction"] = 1.0;
  j["noise"] = {{"kind", "gaussian"}, {"sigma", 0.0}};
  j["loss"]["variants"] = {"MC"};
  RunOptions opts;
  opts.epoch_limit = 1;
  const ExperimentReport r = run_experiment(parse_experiment_config(j), opts);
  for (double v : r.method("pinv").psnr) EXPECT_EQ(v, std::numeric_limits<double>::infinity());
}

TEST(Experiment, NoiselessReiAndEiAgree) {
  json j = small_config("x");
  j["noise"] = {{"kind", "gaussian"}, {"sigma", 0.0}};
  j["loss"]["variants"] = {"REI", "EI"};
  j["loss"]["sure_scale"] = 1.0;
  const ExperimentReport r = run_experiment(parse_experiment_config(j));
  const MethodResult &rei = r.method("REI"), &ei = r.method("EI");
  EXPECT_EQ(rei.psnr, ei.psnr);
  ASSERT_TRUE(rei.model && ei.model);
  EXPECT_TRUE(bitwise_equal(rei.model->params(), ei.model->params()));
  for (std::size_t e = 0; e < rei.history.size(); ++e) {
    EXPECT_EQ(rei.history[e].terms.at("total"), ei.history[e].terms.at("total"));
    EXPECT_EQ(rei.history[e].terms.at("sure"), ei.history[e].terms.at("mc"));
    EXPECT_EQ(rei.history[e].terms.at("req"), ei.history[e].terms.at("eq"));
  }
}

TEST(Experiment, ReportsReproduceBitExactly) {
  TempDir dir("report");
  const ExperimentConfig cfg = parse_experiment_config(small_config("x"));
  for (const char* sub : {"a", "b"}) write_report(run_experiment(cfg), dir.path() / sub);
  for (const char* f : {"report.csv", "per_image.csv", "metrics_REI.csv", "metrics_MC.csv"}) {
    const std::string a = slurp(dir.path() / "a" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir.path() / "b" / f)) << f;
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "a" / "report.json"));
  const std::string report = slurp(dir.path() / "a" / "report.csv");
  EXPECT_EQ(report.substr(0, report.find('\n')), "method,mean_psnr,std_psnr,count");
}

TEST(Experiment, ReconstructionsWritten) {
  TempDir dir("recon");
  json j = small_config("x");
  j["loss"]["variants"] = {"MC"};
  RunOptions opts;
  opts.epoch_limit = 1;
  const ExperimentReport r = run_experiment(parse_experiment_config(j), opts);
  write_reconstructions(r, dir.path());
  std::size_t count = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir.path() / "recon"))
    if (e.path().extension() == ".pgm") ++count;
  EXPECT_EQ(count, 4u);  // 2 test images × (pinv, MC)
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "recon" / "MC" / "test_1.pgm"));
  EXPECT_EQ(read_pgm(dir.path() / "mask.pgm").shape(), (Tensor::Shape{16, 16}));
}
