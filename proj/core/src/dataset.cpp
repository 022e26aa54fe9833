// SPDX-License-Identifier: Apache-2.0
#include "rei/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "rei/errors.hpp"
#include "rei/image_io.hpp"
#include "rei/rng.hpp"

namespace fs = std::filesystem;

namespace rei {

Tensor center_crop_square(const Tensor& image) {
  if (image.rank() != 2) throw ShapeError("center_crop_square: expected [H,W]");
  const std::size_t h = image.dim(0), w = image.dim(1), s = std::min(h, w);
  const std::size_t r0 = (h - s) / 2, c0 = (w - s) / 2;
  Tensor out(Tensor::Shape{s, s});
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) out[i * s + j] = image[(r0 + i) * w + c0 + j];
  return out;
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  if (image.rank() != 2) throw ShapeError("resize_bilinear: expected [H,W]");
  if (out_h == 0 || out_w == 0) throw ShapeError("resize_bilinear: output extents must be positive");
  const std::size_t h = image.dim(0), w = image.dim(1);
  const auto coord = [](std::size_t i, std::size_t in, std::size_t out, std::size_t& lo, std::size_t& hi, double& t) {
    double s = (static_cast<double>(i) + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(in - 1));
    lo = static_cast<std::size_t>(std::floor(s));
    hi = std::min(lo + 1, in - 1);
    t = s - static_cast<double>(lo);
  };
  Tensor out(Tensor::Shape{out_h, out_w});
  for (std::size_t i = 0; i < out_h; ++i) {
    std::size_t y0, y1;
    double ty;
    coord(i, h, out_h, y0, y1, ty);
    for (std::size_t j = 0; j < out_w; ++j) {
      std::size_t x0, x1;
      double tx;
      coord(j, w, out_w, x0, x1, tx);
      const double top = (1 - tx) * image[y0 * w + x0] + tx * image[y0 * w + x1];
      const double bot = (1 - tx) * image[y1 * w + x0] + tx * image[y1 * w + x1];
      out[i * out_w + j] = (1 - ty) * top + ty * bot;
    }
  }
  return out;
}

namespace {

Tensor prepare(const Tensor& plane, std::size_t side) {
  Tensor sq = center_crop_square(plane);
  Tensor r = sq.dim(0) == side ? sq : resize_bilinear(sq, side, side);
  for (double& v : r.data()) v = std::clamp(v, 0.0, 1.0);
  return r;
}

Tensor stack(const std::vector<Tensor>& planes) {
  const std::size_t h = planes.front().dim(0), w = planes.front().dim(1);
  Tensor out(Tensor::Shape{planes.size(), h, w});
  for (std::size_t c = 0; c < planes.size(); ++c)
    std::copy(planes[c].data().begin(), planes[c].data().end(), out.data().begin() + static_cast<long>(c * h * w));
  return out;
}

Tensor load_one(const fs::path& path, std::size_t side, std::size_t channels) {
  Tensor raw;
  const std::string ext = path.extension().string();
  if (channels == 3 && (ext == ".png" || ext == ".PNG")) {
    raw = read_png_rgb(path);
  } else {
    raw = read_image(path);
  }
  if (raw.rank() == 3 && raw.dim(0) == 1) raw = raw.reshaped({raw.dim(1), raw.dim(2)});
  std::vector<Tensor> planes;
  if (raw.rank() == 2) {
    planes.assign(channels, prepare(raw, side));
  } else if (raw.rank() == 3 && raw.dim(0) == channels) {
    const std::size_t hw = raw.dim(1) * raw.dim(2);
    for (std::size_t c = 0; c < channels; ++c) {
      Tensor plane(Tensor::Shape{raw.dim(1), raw.dim(2)});
      std::copy_n(raw.data().begin() + static_cast<long>(c * hw), hw, plane.data().begin());
      planes.push_back(prepare(plane, side));
    }
  } else {
    throw FormatError(path.string() + ": cannot map shape " + shape_string(raw.shape()) + " to " +
                      std::to_string(channels) + " channel(s)");
  }
  return stack(planes);
}

void assign_split(Dataset& d, std::size_t train_count, std::size_t test_count) {
  const std::size_t n = d.images.size();
  if (train_count == 0) train_count = n;
  if (train_count > n) throw ConfigError("dataset has " + std::to_string(n) + " images, fewer than train_count");
  const std::size_t rest = n - train_count;
  if (test_count == 0) test_count = rest;
  if (test_count > rest) throw ConfigError("dataset too small for the requested test split");
  for (std::size_t i = 0; i < train_count; ++i) d.train.push_back(i);
  for (std::size_t i = train_count; i < train_count + test_count; ++i) d.test.push_back(i);
}

}  // namespace

Dataset load_dataset(const fs::path& dir, std::size_t side, std::size_t train_count, std::size_t test_count,
                     std::size_t channels) {
  if (side == 0) throw ConfigError("data.side must be positive");
  if (channels != 1 && channels != 3) throw ConfigError("data.channels must be 1 or 3");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw FormatError(dir.string() + ": not a readable directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  if (files.empty()) throw FormatError(dir.string() + ": no images found");
  std::sort(files.begin(), files.end());
  Dataset d;
  for (const auto& f : files) {
    d.images.push_back(load_one(f, side, channels));
    d.names.push_back(f.filename().string());
  }
  assign_split(d, train_count, test_count);
  return d;
}

Dataset synthetic_dataset(std::size_t train_count, std::size_t test_count, std::size_t side, std::uint64_t seed,
                          std::size_t channels) {
  if (side == 0 || train_count == 0) throw ConfigError("synthetic data needs side > 0 and train_count > 0");
  const double n = static_cast<double>(side);
  const auto wrap = [&](double d) {
    d = std::fmod(std::abs(d), n);
    return std::min(d, n - d);
  };
  Dataset d;
  for (std::size_t k = 0; k < train_count + test_count; ++k) {
    RngStream rng(seed, {k, 0, Purpose::data});
    std::vector<Tensor> planes;
    // Geometry is shared by all channels; intensities differ per channel.
    struct Shape {
      bool ellipse;
      double cy, cx, ry, rx, angle;
    };
    const std::size_t count = 3 + rng.below(5);
    std::vector<Shape> shapes;
    for (std::size_t s = 0; s < count; ++s) {
      shapes.push_back({rng.uniform() < 0.6, rng.uniform() * n, rng.uniform() * n, n * (0.06 + 0.2 * rng.uniform()),
                        n * (0.06 + 0.2 * rng.uniform()), std::numbers::pi * rng.uniform()});
    }
    const double fy = static_cast<double>(1 + rng.below(2)), fx = static_cast<double>(rng.below(3));
    const double phase = 2 * std::numbers::pi * rng.uniform();
    for (std::size_t c = 0; c < channels; ++c) {
      const double base = 0.2 + 0.3 * rng.uniform(), amp = 0.1 * rng.uniform();
      std::vector<double> levels(count);
      for (double& l : levels) l = 0.1 + 0.85 * rng.uniform();
      Tensor img(Tensor::Shape{side, side});
      for (std::size_t i = 0; i < side; ++i)
        for (std::size_t j = 0; j < side; ++j) {
          const double ii = static_cast<double>(i), jj = static_cast<double>(j);
          double v = base + amp * std::cos(2 * std::numbers::pi * (fy * ii + fx * jj) / n + phase);
          for (std::size_t s = 0; s < count; ++s) {
            const Shape& sh = shapes[s];
            const double dy = wrap(ii - sh.cy), dx = wrap(jj - sh.cx);
            bool inside;
            if (sh.ellipse) {
              const double ca = std::cos(sh.angle), sa = std::sin(sh.angle);
              const double u = ca * dx + sa * dy, w = -sa * dx + ca * dy;
              inside = (u * u) / (sh.rx * sh.rx) + (w * w) / (sh.ry * sh.ry) <= 1.0;
            } else {
              inside = dy <= sh.ry && dx <= sh.rx;
            }
            if (inside) v = levels[s];
          }
          img[i * side + j] = std::clamp(v, 0.0, 1.0);
        }
      planes.push_back(std::move(img));
    }
    d.images.push_back(stack(planes));
    d.names.push_back("synthetic_" + std::to_string(k));
  }
  assign_split(d, train_count, test_count);
  return d;
}

namespace {

// Separable Gaussian blur with zero padding, truncated at 4σ.
Tensor gaussian_blur(const Tensor& img, double sigma) {
  const std::size_t n = img.dim(0);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double d = static_cast<double>(k) / sigma;
    taps[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * d * d);
    total += taps[static_cast<std::size_t>(k + radius)];
  }
  for (double& t : taps) t /= total;
  const auto pass = [&](const Tensor& in, bool rows) {
    Tensor out(in.shape());
    const auto sn = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t i = 0; i < sn; ++i)
      for (std::ptrdiff_t j = 0; j < sn; ++j) {
        double acc = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
          const std::ptrdiff_t a = rows ? i + k : i, b = rows ? j : j + k;
          if (a < 0 || b < 0 || a >= sn || b >= sn) continue;
          acc += taps[static_cast<std::size_t>(k + radius)] * in[static_cast<std::size_t>(a * sn + b)];
        }
        out[static_cast<std::size_t>(i * sn + j)] = acc;
      }
    return out;
  };
  return pass(pass(img, true), false);
}

}  // namespace

Tensor phantom(std::size_t side, double edge_sigma) {
  if (!(edge_sigma >= 0.0)) throw DomainError("phantom: edge_sigma must be nonnegative");
  struct Ellipse {
    double x0, y0, a, b, phi, value;
  };
  static const Ellipse ellipses[] = {
      {0.0, 0.0, 0.69, 0.92, 0, 1.0},          {0.0, -0.0184, 0.6624, 0.874, 0, -0.8},
      {0.22, 0.0, 0.11, 0.31, -18, -0.2},      {-0.22, 0.0, 0.16, 0.41, 18, -0.2},
      {0.0, 0.35, 0.21, 0.25, 0, 0.1},         {0.0, 0.1, 0.046, 0.046, 0, 0.1},
      {0.0, -0.1, 0.046, 0.046, 0, 0.1},       {-0.08, -0.605, 0.046, 0.023, 0, 0.1},
      {0.0, -0.605, 0.023, 0.023, 0, 0.1},     {0.06, -0.605, 0.023, 0.046, 0, 0.1},
  };
  Tensor img(Tensor::Shape{side, side});
  const double n = static_cast<double>(side);
  for (std::size_t i = 0; i < side; ++i)
    for (std::size_t j = 0; j < side; ++j) {
      const double x = 2.0 * (static_cast<double>(j) + 0.5) / n - 1.0;
      const double y = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / n;
      double v = 0.0;
      for (const auto& e : ellipses) {
        const double t = e.phi * std::numbers::pi / 180.0;
        const double u = (x - e.x0) * std::cos(t) + (y - e.y0) * std::sin(t);
        const double w = -(x - e.x0) * std::sin(t) + (y - e.y0) * std::cos(t);
        if ((u * u) / (e.a * e.a) + (w * w) / (e.b * e.b) <= 1.0) v += e.value;
      }
      img[i * side + j] = std::clamp(v, 0.0, 1.0);
    }
  return edge_sigma > 0.0 ? gaussian_blur(img, edge_sigma) : img;
}

Tensor to_signal(const Tensor& image, const ForwardOperator& op) {
  const auto shape = op.image_shape();
  if (image.shape() == shape) return image;
  if (shape.size() == 3 && shape[0] == 2 && image.rank() == 3 && image.dim(0) == 1 && image.dim(1) == shape[1] &&
      image.dim(2) == shape[2]) {
    Tensor out(shape);
    std::copy(image.data().begin(), image.data().end(), out.data().begin());
    return out;
  }
  if (image.size() == shape_size(shape) && image.rank() == 2) return image.reshaped(shape);
  throw ShapeError("image " + shape_string(image.shape()) + " does not fit operator " + op.name() + " input " +
                   shape_string(shape));
}

MeasuredSplit simulate_measurements(const Dataset& data, const ForwardOperator& op, const NoiseParams& noise,
                                    std::uint64_t seed) {
  noise.validate();
  MeasuredSplit out;
  const auto measure = [&](std::size_t index, Tensor& x, Tensor& u) {
    x = to_signal(data.images.at(index), op);
    u = op.apply(x);
    RngStream rng(seed, {index, 0, Purpose::meas_noise});
    return sample_on_support(noise, u, op.measurement_support(), rng);
  };
  for (std::size_t i : data.train) {
    Tensor x, u;
    Tensor y = measure(i, x, u);
    out.train.push_back(TrainItem{std::move(y), std::move(x), std::move(u)});
  }
  for (std::size_t i : data.test) {
    Tensor x, u;
    Tensor y = measure(i, x, u);
    out.test.push_back(EvalItem{std::move(y), std::move(x)});
  }
  return out;
}

}  // namespace rei
