#include "lewisim/optim.hpp"

#include <algorithm>
#include <cmath>

namespace lewisim {

Adam::Adam(std::vector<Param*> params, AdamConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
  for (Param* p : params_) {
    if (p->m.size() != p->value.v.size()) {
      p->m.assign(p->value.v.size(), 0.0);
      p->vv.assign(p->value.v.size(), 0.0);
    }
    p->ensure_grad();
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (Param* p : params_) {
    if (p->grad.size() != p->value.v.size()) throw ContractError("adam: grad shape mismatch");
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      const double g = p->grad[i];
      p->m[i] = cfg_.beta1 * p->m[i] + (1.0 - cfg_.beta1) * g;
      p->vv[i] = cfg_.beta2 * p->vv[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = p->m[i] / bc1;
      const double vhat = p->vv[i] / bc2;
      double w = p->value.v[i];
      if (cfg_.weight_decay > 0.0) w -= cfg_.lr * cfg_.weight_decay * w;
      w -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      if (!std::isfinite(w)) throw NumericError("non-finite parameter after adam step", -1);
      p->value.v[i] = w;
    }
    p->zero_grad();
  }
}

double grad_check(const std::function<double()>& loss_value,
                  const std::function<void()>& compute_grads,
                  std::vector<Param*> params, double h) {
  for (Param* p : params) p->zero_grad();
  compute_grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (Param* p : params) analytic.push_back(p->grad);

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    for (std::size_t i = 0; i < p->value.v.size(); ++i) {
      const double saved = p->value.v[i];
      p->value.v[i] = saved + h;
      const double up = loss_value();
      p->value.v[i] = saved - h;
      const double dn = loss_value();
      p->value.v[i] = saved;
      const double numeric = (up - dn) / (2.0 * h);
      const double a = analytic[pi][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  for (Param* p : params) p->zero_grad();
  return worst;
}

double grad_check(const std::function<Graph::Id(Graph&)>& builder,
                  std::vector<Param*> params, double h) {
  auto loss_value = [&]() {
    Graph g;
    return g.val(builder(g)).v[0];
  };
  auto compute_grads = [&]() {
    Graph g;
    Graph::Id loss = builder(g);
    g.backward(loss);
  };
  return grad_check(loss_value, compute_grads, std::move(params), h);
}

void init_uniform_fan_in(Param& p, int fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& x : p.value.v) x = rng.uniform(-bound, bound);
}

std::uint64_t params_fingerprint(const std::vector<Param*>& params) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const Param* p : params)
    h = fnv1a(p->value.v.data(), p->value.v.size() * sizeof(double), h);
  return h;
}

}  // namespace lewisim
