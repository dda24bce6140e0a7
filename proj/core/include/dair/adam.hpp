#pragma once

#include <cstdint>
#include <vector>

#include "dair/tensor.hpp"

namespace dair::ad {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam over a fixed group of parameter tensors. First and second moment
// buffers are kept per coordinate; step() applies bias-corrected updates from
// the tensors' grad buffers and zeroes those grads afterwards.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor*> params, AdamConfig config);

  void step();
  void zero_grad();

  std::int64_t iterations() const { return t_; }
  const AdamConfig& config() const { return config_; }
  double& lr() { return config_.lr; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  AdamConfig config_;
  std::int64_t t_ = 0;
};

}  // namespace dair::ad
