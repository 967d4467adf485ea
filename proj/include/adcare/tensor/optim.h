#pragma once

#include <string>
#include <vector>

#include "adcare/tensor/tensor.h"

namespace adcare {

/// A named leaf tensor plus the group it is accounted under (for freezing and
/// the update census).
struct NamedParameter {
  std::string name;
  std::string group;
  Tensor tensor;
};

/// AdamW with decoupled weight decay:
///   w <- w * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
/// With a zero gradient the moment term vanishes and weights shrink by exactly
/// (1 - lr * wd) per step.
class AdamW {
 public:
  struct Options {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
  };

  AdamW(std::vector<NamedParameter> params, Options options);

  void zero_grad();
  // Scales gradients so their global L2 norm is at most max_norm; returns the
  // norm before clipping. max_norm <= 0 disables clipping.
  double clip_grad_norm(double max_norm);
  void step(double lr);

  const std::vector<NamedParameter>& parameters() const { return params_; }
  long steps_taken() const { return t_; }

 private:
  std::vector<NamedParameter> params_;
  Options options_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

}  // namespace adcare
