// SPDX-License-Identifier: Apache-2.0
#include "rei/noise.hpp"

#include <vector>

#include "rei/errors.hpp"

namespace rei {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::poisson: return "poisson";
    case NoiseKind::mpg: return "mpg";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "poisson") return NoiseKind::poisson;
  if (name == "mpg") return NoiseKind::mpg;
  throw ConfigError("unknown noise kind '" + name + "' (expected gaussian, poisson or mpg)");
}

void NoiseParams::validate() const {
  const auto fail = [&](const std::string& why) { throw DomainError(to_string(kind) + " noise: " + why); };
  if (!(sigma >= 0.0) || !(gamma >= 0.0)) fail("sigma and gamma must be nonnegative");
  switch (kind) {
    case NoiseKind::gaussian:
      if (gamma != 0.0) fail("gamma must be 0");
      break;
    case NoiseKind::poisson:
      if (!(gamma > 0.0)) fail("gamma must be positive");
      if (sigma != 0.0) fail("sigma must be 0");
      break;
    case NoiseKind::mpg:
      if (!(gamma > 0.0) || !(sigma > 0.0)) fail("gamma and sigma must be positive");
      break;
  }
}

namespace {

void require_nonnegative(const Tensor& u, const char* what) {
  for (double v : u.data())
    if (!(v >= 0.0)) throw DomainError(std::string(what) + ": mean must be nonnegative");
}

}  // namespace

Tensor sample_gaussian(const Tensor& u, double sigma, RngStream& rng) {
  if (!(sigma >= 0.0)) throw DomainError("gaussian noise: sigma must be nonnegative");
  if (sigma == 0.0) return u;
  Tensor y = u;
  for (double& v : y.data()) v += sigma * rng.normal();
  return y;
}

Tensor sample_poisson(const Tensor& u, double gamma, RngStream& rng) {
  if (!(gamma > 0.0)) throw DomainError("poisson noise: gamma must be positive");
  require_nonnegative(u, "poisson noise");
  Tensor y(u.shape());
  for (std::size_t i = 0; i < u.size(); ++i) y[i] = gamma * static_cast<double>(rng.poisson(u[i] / gamma));
  return y;
}

Tensor sample_mpg(const Tensor& u, double gamma, double sigma, RngStream& rng) {
  Tensor y = sample_poisson(u, gamma, rng);
  return sample_gaussian(y, sigma, rng);
}

Tensor sample(const NoiseParams& noise, const Tensor& u, RngStream& rng) {
  noise.validate();
  switch (noise.kind) {
    case NoiseKind::gaussian: return sample_gaussian(u, noise.sigma, rng);
    case NoiseKind::poisson: return sample_poisson(u, noise.gamma, rng);
    case NoiseKind::mpg: return sample_mpg(u, noise.gamma, noise.sigma, rng);
  }
  return u;
}

Tensor sample_on_support(const NoiseParams& noise, const Tensor& u, const Tensor& support, RngStream& rng) {
  require_same_shape(u, support, "sample_on_support");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < support.size(); ++i)
    if (support[i] != 0.0) idx.push_back(i);
  if (idx.empty()) return u;
  Tensor packed(Tensor::Shape{idx.size()});
  for (std::size_t k = 0; k < idx.size(); ++k) packed[k] = u[idx[k]];
  const Tensor noisy = sample(noise, packed, rng);
  Tensor y = u;
  for (std::size_t k = 0; k < idx.size(); ++k) y[idx[k]] = noisy[k];
  return y;
}

}  // namespace rei
