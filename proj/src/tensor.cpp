#include "lewisim/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace lewisim {

namespace {
constexpr double kLayerNormEps = 1e-5;
}

Tensor::Tensor(std::vector<int> s) : shape(std::move(s)) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ContractError("Tensor: nonpositive dimension");
    n *= d;
  }
  v.assign(static_cast<std::size_t>(n), 0.0);
}

Tensor::Tensor(int r, int c) : Tensor(std::vector<int>{r, c}) {}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.shape = {1, static_cast<int>(values.size())};
  t.v = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) {
  Tensor t;
  t.shape = {1};
  t.v = {value};
  return t;
}

bool Tensor::all_finite() const {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Param::Param(std::string n, Tensor t) : name(std::move(n)), value(std::move(t)) {
  ensure_grad();
}

void Param::ensure_grad() {
  grad.assign(value.v.size(), 0.0);
}

void Param::zero_grad() {
  std::fill(grad.begin(), grad.end(), 0.0);
}

const Tensor& Graph::node_val(const Node& n) const {
  return n.op == Op::kParam ? n.param->value : n.val;
}

const Tensor& Graph::val(Id id) const { return node_val(nodes_[static_cast<std::size_t>(id)]); }

const std::vector<double>& Graph::grad(Id id) const {
  return nodes_[static_cast<std::size_t>(id)].grad;
}

Graph::Id Graph::push(Node n) {
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

std::vector<double>& Graph::grad_buf(Id id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad.assign(node_val(n).v.size(), 0.0);
  return n.grad;
}

Graph::Id Graph::input(Tensor t) {
  Node n;
  n.op = Op::kInput;
  n.val = std::move(t);
  return push(std::move(n));
}

Graph::Id Graph::param(Param& p) {
  Node n;
  n.op = Op::kParam;
  n.param = &p;
  return push(std::move(n));
}

Graph::Id Graph::matmul(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.cols() != B.rows()) throw ContractError("matmul: inner dimensions differ");
  Node n;
  n.op = Op::kMatMul;
  n.in[0] = a;
  n.in[1] = b;
  n.val = Tensor(A.rows(), B.cols());
  const int nr = A.rows(), nk = A.cols(), nc = B.cols();
  for (int i = 0; i < nr; ++i) {
    const double* arow = &A.v[static_cast<std::size_t>(i) * nk];
    double* crow = &n.val.v[static_cast<std::size_t>(i) * nc];
    for (int k = 0; k < nk; ++k) {
      const double aik = arow[k];
      if (aik == 0.0) continue;
      const double* brow = &B.v[static_cast<std::size_t>(k) * nc];
      for (int j = 0; j < nc; ++j) crow[j] += aik * brow[j];
    }
  }
  return push(std::move(n));
}

Graph::Id Graph::affine(Id x, Id w, Id b) {
  Id y = matmul(x, w);
  return add(y, b);
}

Graph::Id Graph::rows(Id table, std::vector<std::int32_t> idx) {
  const Tensor& T = val(table);
  const int d = T.cols();
  Node n;
  n.op = Op::kRows;
  n.in[0] = table;
  n.val = Tensor(static_cast<int>(idx.size()), d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= T.rows()) throw ContractError("rows: index out of range");
    std::copy_n(&T.v[static_cast<std::size_t>(idx[i]) * d], d,
                &n.val.v[i * static_cast<std::size_t>(d)]);
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

Graph::Id Graph::add(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  Node n;
  n.in[0] = a;
  n.in[1] = b;
  if (A.shape == B.shape) {
    n.op = Op::kAdd;
    n.val = A;
    for (std::size_t i = 0; i < n.val.v.size(); ++i) n.val.v[i] += B.v[i];
  } else if (B.rows() == 1 && B.cols() == A.cols()) {
    n.op = Op::kAddRow;
    n.val = A;
    for (int i = 0; i < A.rows(); ++i)
      for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) += B.v[static_cast<std::size_t>(j)];
  } else {
    throw ContractError("add: incompatible shapes");
  }
  return push(std::move(n));
}

Graph::Id Graph::mul(Id a, Id b) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.shape != B.shape) throw ContractError("mul: shape mismatch");
  Node n;
  n.op = Op::kMul;
  n.in[0] = a;
  n.in[1] = b;
  n.val = A;
  for (std::size_t i = 0; i < n.val.v.size(); ++i) n.val.v[i] *= B.v[i];
  return push(std::move(n));
}

Graph::Id Graph::scale(Id a, double c) {
  Node n;
  n.op = Op::kScale;
  n.in[0] = a;
  n.c = c;
  n.val = val(a);
  for (double& x : n.val.v) x *= c;
  return push(std::move(n));
}

Graph::Id Graph::sigmoid(Id a) {
  Node n;
  n.op = Op::kSigmoid;
  n.in[0] = a;
  n.val = val(a);
  for (double& x : n.val.v) x = 1.0 / (1.0 + std::exp(-x));
  return push(std::move(n));
}

Graph::Id Graph::tanh_(Id a) {
  Node n;
  n.op = Op::kTanh;
  n.in[0] = a;
  n.val = val(a);
  for (double& x : n.val.v) x = std::tanh(x);
  return push(std::move(n));
}

Graph::Id Graph::layer_norm(Id x, Id gain) { return layer_norm(x, gain, -1); }

Graph::Id Graph::layer_norm(Id x, Id gain, Id bias) {
  const Tensor& X = val(x);
  const int d = X.cols();
  if (val(gain).size() != d) throw ContractError("layer_norm: gain length mismatch");
  if (bias >= 0 && val(bias).size() != d) throw ContractError("layer_norm: bias length mismatch");
  if (d < 1) throw ContractError("layer_norm: empty rows");
  Node n;
  n.op = Op::kLayerNorm;
  n.in[0] = x;
  n.in[1] = gain;
  n.in[2] = bias;
  n.val = Tensor(X.rows(), d);
  n.aux.resize(static_cast<std::size_t>(X.rows()) * (static_cast<std::size_t>(d) + 1));
  const double* g = val(gain).v.data();
  const double* b = bias >= 0 ? val(bias).v.data() : nullptr;
  for (int i = 0; i < X.rows(); ++i) {
    const double* xr = &X.v[static_cast<std::size_t>(i) * d];
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      const double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    // aux row layout: [xhat_0..xhat_{d-1}, inv_std]
    double* ax = &n.aux[static_cast<std::size_t>(i) * (d + 1)];
    double* yr = &n.val.v[static_cast<std::size_t>(i) * d];
    for (int j = 0; j < d; ++j) {
      const double xh = (xr[j] - mean) * inv;
      ax[j] = xh;
      yr[j] = g[j] * xh + (b ? b[j] : 0.0);
    }
    ax[d] = inv;
  }
  return push(std::move(n));
}

Graph::Id Graph::log_softmax(Id logits) {
  const Tensor& X = val(logits);
  const int d = X.cols();
  Node n;
  n.op = Op::kLogSoftmax;
  n.in[0] = logits;
  n.val = Tensor(X.rows(), d);
  for (int i = 0; i < X.rows(); ++i) {
    const double* xr = &X.v[static_cast<std::size_t>(i) * d];
    double* yr = &n.val.v[static_cast<std::size_t>(i) * d];
    double mx = xr[0];
    for (int j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += std::exp(xr[j] - mx);
    const double lz = mx + std::log(z);
    for (int j = 0; j < d; ++j) yr[j] = xr[j] - lz;
  }
  return push(std::move(n));
}

Graph::Id Graph::pick(Id logp, std::vector<std::int32_t> idx) {
  const Tensor& X = val(logp);
  if (static_cast<int>(idx.size()) != X.rows()) throw ContractError("pick: index count != rows");
  Node n;
  n.op = Op::kPick;
  n.in[0] = logp;
  n.val = Tensor(std::vector<int>{X.rows()});
  for (int i = 0; i < X.rows(); ++i) {
    if (idx[static_cast<std::size_t>(i)] < 0 || idx[static_cast<std::size_t>(i)] >= X.cols())
      throw ContractError("pick: target out of range");
    n.val.v[static_cast<std::size_t>(i)] = X.at(i, idx[static_cast<std::size_t>(i)]);
  }
  n.idx = std::move(idx);
  return push(std::move(n));
}

Graph::Id Graph::entropy(Id logp) {
  const Tensor& X = val(logp);
  Node n;
  n.op = Op::kEntropy;
  n.in[0] = logp;
  n.val = Tensor(std::vector<int>{X.rows()});
  for (int i = 0; i < X.rows(); ++i) {
    double h = 0.0;
    for (int j = 0; j < X.cols(); ++j) {
      const double lp = X.at(i, j);
      h -= std::exp(lp) * lp;
    }
    n.val.v[static_cast<std::size_t>(i)] = h;
  }
  return push(std::move(n));
}

Graph::Id Graph::slice_cols(Id x, int begin, int end) {
  const Tensor& X = val(x);
  if (begin < 0 || end > X.cols() || begin >= end) throw ContractError("slice_cols: bad range");
  Node n;
  n.op = Op::kSliceCols;
  n.in[0] = x;
  n.i0 = begin;
  n.i1 = end;
  n.val = Tensor(X.rows(), end - begin);
  for (int i = 0; i < X.rows(); ++i)
    std::copy_n(&X.v[static_cast<std::size_t>(i) * X.cols() + begin], end - begin,
                &n.val.v[static_cast<std::size_t>(i) * (end - begin)]);
  return push(std::move(n));
}

Graph::Id Graph::lerp_rows(Id a, Id b, std::vector<double> keep) {
  const Tensor& A = val(a);
  const Tensor& B = val(b);
  if (A.shape != B.shape) throw ContractError("lerp_rows: shape mismatch");
  if (static_cast<int>(keep.size()) != A.rows()) throw ContractError("lerp_rows: mask size");
  Node n;
  n.op = Op::kLerpRows;
  n.in[0] = a;
  n.in[1] = b;
  n.val = Tensor(A.rows(), A.cols());
  for (int i = 0; i < A.rows(); ++i) {
    const double k = keep[static_cast<std::size_t>(i)];
    for (int j = 0; j < A.cols(); ++j) n.val.at(i, j) = k * A.at(i, j) + (1.0 - k) * B.at(i, j);
  }
  n.aux = std::move(keep);
  return push(std::move(n));
}

Graph::Id Graph::dropout(Id x, double rate, Rng& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0,1)");
  const Tensor& X = val(x);
  Node n;
  n.op = Op::kDropout;
  n.in[0] = x;
  n.val = Tensor(X.rows(), X.cols());
  n.aux.resize(X.v.size());
  const double keep_scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < X.v.size(); ++i) {
    const double m = rng.uniform() < rate ? 0.0 : keep_scale;
    n.aux[i] = m;
    n.val.v[i] = X.v[i] * m;
  }
  return push(std::move(n));
}

Graph::Id Graph::sum(Id x) {
  Node n;
  n.op = Op::kSum;
  n.in[0] = x;
  double s = 0.0;
  for (double v : val(x).v) s += v;
  n.val = Tensor::scalar(s);
  return push(std::move(n));
}

Graph::Id Graph::mean(Id x) {
  Node n;
  n.op = Op::kMean;
  n.in[0] = x;
  double s = 0.0;
  const auto& X = val(x);
  for (double v : X.v) s += v;
  n.val = Tensor::scalar(s / static_cast<double>(X.size()));
  return push(std::move(n));
}

Graph::Id Graph::weighted_sum(Id x, std::vector<double> w) {
  const Tensor& X = val(x);
  if (w.size() != X.v.size()) throw ContractError("weighted_sum: weight size mismatch");
  Node n;
  n.op = Op::kWeightedSum;
  n.in[0] = x;
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * X.v[i];
  n.val = Tensor::scalar(s);
  n.aux = std::move(w);
  return push(std::move(n));
}

Graph::Id Graph::group_dot(Id msg, Id cand, int group) {
  const Tensor& M = val(msg);
  const Tensor& C = val(cand);
  if (group < 1 || C.rows() != M.rows() * group || C.cols() != M.cols())
    throw ContractError("group_dot: shape mismatch");
  Node n;
  n.op = Op::kGroupDot;
  n.in[0] = msg;
  n.in[1] = cand;
  n.i0 = group;
  n.val = Tensor(M.rows(), group);
  const int d = M.cols();
  for (int i = 0; i < M.rows(); ++i) {
    const double* mr = &M.v[static_cast<std::size_t>(i) * d];
    for (int g = 0; g < group; ++g) {
      const double* cr = &C.v[(static_cast<std::size_t>(i) * group + g) * d];
      double s = 0.0;
      for (int j = 0; j < d; ++j) s += mr[j] * cr[j];
      n.val.at(i, g) = s;
    }
  }
  return push(std::move(n));
}

void Graph::backward(Id loss) {
  if (val(loss).size() != 1) throw ContractError("backward: loss must be scalar");
  grad_buf(loss)[0] = 1.0;
  for (Id id = loss; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.empty()) continue;
    for (double g : n.grad) {
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient in reverse pass", id);
    }
    backward_node(id);
    if (n.op == Op::kParam) {
      n.param->ensure_grad();
      for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
    }
  }
}

void Graph::backward_node(Id id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  const std::vector<double>& g = n.grad;
  switch (n.op) {
    case Op::kInput:
    case Op::kParam:
      break;
    case Op::kMatMul: {
      const Tensor& A = val(n.in[0]);
      const Tensor& B = val(n.in[1]);
      auto& ga = grad_buf(n.in[0]);
      auto& gb = grad_buf(n.in[1]);
      const int nr = A.rows(), nk = A.cols(), nc = B.cols();
      for (int i = 0; i < nr; ++i) {
        const double* grow = &g[static_cast<std::size_t>(i) * nc];
        const double* arow = &A.v[static_cast<std::size_t>(i) * nk];
        double* garow = &ga[static_cast<std::size_t>(i) * nk];
        for (int k = 0; k < nk; ++k) {
          const double* brow = &B.v[static_cast<std::size_t>(k) * nc];
          double acc = 0.0;
          for (int j = 0; j < nc; ++j) acc += grow[j] * brow[j];
          garow[k] += acc;
          const double aik = arow[k];
          if (aik != 0.0) {
            double* gbrow = &gb[static_cast<std::size_t>(k) * nc];
            for (int j = 0; j < nc; ++j) gbrow[j] += aik * grow[j];
          }
        }
      }
      break;
    }
    case Op::kRows: {
      auto& gt = grad_buf(n.in[0]);
      const int d = n.val.cols();
      for (std::size_t i = 0; i < n.idx.size(); ++i) {
        double* dst = &gt[static_cast<std::size_t>(n.idx[i]) * d];
        const double* src = &g[i * static_cast<std::size_t>(d)];
        for (int j = 0; j < d; ++j) dst[j] += src[j];
      }
      break;
    }
    case Op::kAdd: {
      auto& ga = grad_buf(n.in[0]);
      auto& gb = grad_buf(n.in[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i];
        gb[i] += g[i];
      }
      break;
    }
    case Op::kAddRow: {
      auto& ga = grad_buf(n.in[0]);
      auto& gb = grad_buf(n.in[1]);
      const int c = n.val.cols();
      for (int i = 0; i < n.val.rows(); ++i)
        for (int j = 0; j < c; ++j) {
          ga[static_cast<std::size_t>(i) * c + j] += g[static_cast<std::size_t>(i) * c + j];
          gb[static_cast<std::size_t>(j)] += g[static_cast<std::size_t>(i) * c + j];
        }
      break;
    }
    case Op::kMul: {
      const Tensor& A = val(n.in[0]);
      const Tensor& B = val(n.in[1]);
      auto& ga = grad_buf(n.in[0]);
      auto& gb = grad_buf(n.in[1]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga[i] += g[i] * B.v[i];
        gb[i] += g[i] * A.v[i];
      }
      break;
    }
    case Op::kScale: {
      auto& ga = grad_buf(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += n.c * g[i];
      break;
    }
    case Op::kSigmoid: {
      auto& ga = grad_buf(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.val.v[i];
        ga[i] += g[i] * y * (1.0 - y);
      }
      break;
    }
    case Op::kTanh: {
      auto& ga = grad_buf(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = n.val.v[i];
        ga[i] += g[i] * (1.0 - y * y);
      }
      break;
    }
    case Op::kLayerNorm: {
      const int d = n.val.cols();
      auto& gx = grad_buf(n.in[0]);
      auto& gg = grad_buf(n.in[1]);
      std::vector<double>* gb = n.in[2] >= 0 ? &grad_buf(n.in[2]) : nullptr;
      const double* gain = val(n.in[1]).v.data();
      for (int i = 0; i < n.val.rows(); ++i) {
        const double* ax = &n.aux[static_cast<std::size_t>(i) * (d + 1)];
        const double inv = ax[d];
        const double* gr = &g[static_cast<std::size_t>(i) * d];
        double mean_gy = 0.0, mean_gyx = 0.0;
        for (int j = 0; j < d; ++j) {
          const double gy = gr[j] * gain[j];
          mean_gy += gy;
          mean_gyx += gy * ax[j];
        }
        mean_gy /= d;
        mean_gyx /= d;
        double* gxr = &gx[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) {
          const double gy = gr[j] * gain[j];
          gxr[j] += inv * (gy - mean_gy - ax[j] * mean_gyx);
          gg[static_cast<std::size_t>(j)] += gr[j] * ax[j];
          if (gb) (*gb)[static_cast<std::size_t>(j)] += gr[j];
        }
      }
      break;
    }
    case Op::kLogSoftmax: {
      auto& ga = grad_buf(n.in[0]);
      const int d = n.val.cols();
      for (int i = 0; i < n.val.rows(); ++i) {
        const double* gr = &g[static_cast<std::size_t>(i) * d];
        const double* yr = &n.val.v[static_cast<std::size_t>(i) * d];
        double gsum = 0.0;
        for (int j = 0; j < d; ++j) gsum += gr[j];
        double* gar = &ga[static_cast<std::size_t>(i) * d];
        for (int j = 0; j < d; ++j) gar[j] += gr[j] - std::exp(yr[j]) * gsum;
      }
      break;
    }
    case Op::kPick: {
      auto& ga = grad_buf(n.in[0]);
      const int d = val(n.in[0]).cols();
      for (std::size_t i = 0; i < n.idx.size(); ++i)
        ga[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(n.idx[i])] += g[i];
      break;
    }
    case Op::kEntropy: {
      auto& ga = grad_buf(n.in[0]);
      const Tensor& X = val(n.in[0]);
      const int d = X.cols();
      for (int i = 0; i < X.rows(); ++i)
        for (int j = 0; j < d; ++j) {
          const double lp = X.at(i, j);
          ga[static_cast<std::size_t>(i) * d + j] -=
              g[static_cast<std::size_t>(i)] * std::exp(lp) * (lp + 1.0);
        }
      break;
    }
    case Op::kSliceCols: {
      auto& ga = grad_buf(n.in[0]);
      const int full = val(n.in[0]).cols();
      const int w = n.i1 - n.i0;
      for (int i = 0; i < n.val.rows(); ++i)
        for (int j = 0; j < w; ++j)
          ga[static_cast<std::size_t>(i) * full + n.i0 + j] += g[static_cast<std::size_t>(i) * w + j];
      break;
    }
    case Op::kLerpRows: {
      auto& ga = grad_buf(n.in[0]);
      auto& gb = grad_buf(n.in[1]);
      const int c = n.val.cols();
      for (int i = 0; i < n.val.rows(); ++i) {
        const double k = n.aux[static_cast<std::size_t>(i)];
        for (int j = 0; j < c; ++j) {
          ga[static_cast<std::size_t>(i) * c + j] += k * g[static_cast<std::size_t>(i) * c + j];
          gb[static_cast<std::size_t>(i) * c + j] += (1.0 - k) * g[static_cast<std::size_t>(i) * c + j];
        }
      }
      break;
    }
    case Op::kDropout: {
      auto& ga = grad_buf(n.in[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * n.aux[i];
      break;
    }
    case Op::kSum: {
      auto& ga = grad_buf(n.in[0]);
      for (double& x : ga) x += g[0];
      break;
    }
    case Op::kMean: {
      auto& ga = grad_buf(n.in[0]);
      const double s = g[0] / static_cast<double>(ga.size());
      for (double& x : ga) x += s;
      break;
    }
    case Op::kWeightedSum: {
      auto& ga = grad_buf(n.in[0]);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * n.aux[i];
      break;
    }
    case Op::kGroupDot: {
      const Tensor& M = val(n.in[0]);
      const Tensor& C = val(n.in[1]);
      auto& gm = grad_buf(n.in[0]);
      auto& gc = grad_buf(n.in[1]);
      const int d = M.cols();
      const int group = n.i0;
      for (int i = 0; i < M.rows(); ++i) {
        const double* mr = &M.v[static_cast<std::size_t>(i) * d];
        double* gmr = &gm[static_cast<std::size_t>(i) * d];
        for (int k = 0; k < group; ++k) {
          const double gs = g[static_cast<std::size_t>(i) * group + k];
          if (gs == 0.0) continue;
          const double* cr = &C.v[(static_cast<std::size_t>(i) * group + k) * d];
          double* gcr = &gc[(static_cast<std::size_t>(i) * group + k) * d];
          for (int j = 0; j < d; ++j) {
            gmr[j] += gs * cr[j];
            gcr[j] += gs * mr[j];
          }
        }
      }
      break;
    }
  }
}

}  // namespace lewisim
