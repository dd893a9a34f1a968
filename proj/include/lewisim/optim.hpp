#pragma once

#include <functional>
#include <vector>

#include "lewisim/tensor.hpp"

namespace lewisim {

// Bias-corrected Adam with decoupled weight decay (p -= lr*wd*p).
struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig cfg);

  // Applies one update from the accumulated grads, then zeroes them.
  // t increments exactly once per call. Throws NumericError on non-finite
  // parameter values after the update.
  void step();

  std::int64_t t() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  std::vector<Param*> params_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

// Max over parameter entries of |analytic - numeric| / max(|a|, |n|, 1e-8),
// with central differences at step h. `build` must be a pure function of the
// parameter values (any sampling fixed beforehand).
double grad_check(const std::function<double()>& build_loss,
                  const std::function<void()>& compute_grads,
                  std::vector<Param*> params, double h = 1e-4);

// Convenience overload: one builder used for both passes.
double grad_check(const std::function<Graph::Id(Graph&)>& builder,
                  std::vector<Param*> params, double h = 1e-4);

// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for weight matrices.
void init_uniform_fan_in(Param& p, int fan_in, Rng& rng);

std::uint64_t params_fingerprint(const std::vector<Param*>& params);

}  // namespace lewisim
