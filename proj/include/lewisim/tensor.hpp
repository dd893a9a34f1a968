#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lewisim/rng.hpp"

namespace lewisim {

// Contract violations (dimension mismatches, invalid targets, ...).
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

// Non-finite values produced by a committed operation.
struct NumericError : std::runtime_error {
  int node_id = -1;
  NumericError(const std::string& msg, int node) : std::runtime_error(msg), node_id(node) {}
};

// Dense row-major tensor of 64-bit reals. Rank is 1 or 2 in practice.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s);
  Tensor(int rows, int cols);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double value);

  std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
  int rows() const { return shape.empty() ? 0 : shape[0]; }
  int cols() const { return shape.size() < 2 ? 1 : shape[1]; }
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols() + c]; }
  bool all_finite() const;
};

// Trainable tensor with accumulated gradient and Adam moment slots.
struct Param {
  std::string name;
  Tensor value;
  std::vector<double> grad;   // same length as value.v, zeroed by the optimizer
  std::vector<double> m, vv;  // Adam first/second moments, sized lazily

  Param() = default;
  Param(std::string n, Tensor t);
  void ensure_grad();
  void zero_grad();
};

// Reverse-mode tape over whole-tensor operations. Nodes are appended in
// topological order by construction; backward() walks them once in reverse.
class Graph {
 public:
  using Id = int;

  // Leaves.
  Id input(Tensor t);               // constant, no gradient
  Id param(Param& p);               // reads the live parameter, accumulates grad

  // Linear algebra.
  Id matmul(Id a, Id b);            // [n,k] x [k,m] -> [n,m]
  Id affine(Id x, Id w, Id b);      // x*W + row-broadcast bias
  Id rows(Id table, std::vector<std::int32_t> idx);  // gather rows -> [|idx|, cols]

  // Elementwise.
  Id add(Id a, Id b);               // same shape, or b is a row vector to broadcast
  Id mul(Id a, Id b);               // same shape
  Id scale(Id a, double c);
  Id sigmoid(Id a);
  Id tanh_(Id a);

  // Normalization / distributions.
  Id layer_norm(Id x, Id gain);             // per-row over the last dim, eps 1e-5
  Id layer_norm(Id x, Id gain, Id bias);
  Id log_softmax(Id logits);                // per-row, max-subtracted
  Id pick(Id logp, std::vector<std::int32_t> idx);  // [B,V] -> [B], idx[i] < V
  Id entropy(Id logp);                      // [B,V] -> [B], nats

  // Structure.
  Id slice_cols(Id x, int begin, int end);
  Id lerp_rows(Id a, Id b, std::vector<double> keep);  // keep[i]*a + (1-keep[i])*b
  Id dropout(Id x, double rate, Rng& rng);             // inverted dropout

  // Reductions.
  Id sum(Id x);
  Id mean(Id x);
  Id weighted_sum(Id x, std::vector<double> w);  // dot with constant weights -> scalar

  // Grouped dot products: msg [B,d], cand [B*group,d] -> [B,group].
  Id group_dot(Id msg, Id cand, int group);

  const Tensor& val(Id id) const;
  const std::vector<double>& grad(Id id) const;

  // Seeds d(loss)/d(loss)=1 and accumulates into every reachable Param.
  // Requires a scalar loss node. Throws NumericError on non-finite gradients.
  void backward(Id loss);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  enum class Op {
    kInput, kParam, kMatMul, kAffine, kRows, kAdd, kAddRow, kMul, kScale,
    kSigmoid, kTanh, kLayerNorm, kLogSoftmax, kPick, kEntropy, kSliceCols,
    kLerpRows, kDropout, kSum, kMean, kWeightedSum, kGroupDot
  };

  struct Node {
    Op op;
    Tensor val;                       // empty for kParam (value lives in *param)
    std::vector<double> grad;         // allocated during backward
    Id in[3] = {-1, -1, -1};
    Param* param = nullptr;
    std::vector<std::int32_t> idx;    // rows / pick indices
    std::vector<double> aux;          // masks, weights, saved statistics
    double c = 0.0;                   // scalar operand / dropout keep-prob
    int i0 = 0, i1 = 0;               // slice bounds / group size
  };

  const Tensor& node_val(const Node& n) const;
  Id push(Node n);
  std::vector<double>& grad_buf(Id id);
  void backward_node(Id id);

  std::vector<Node> nodes_;
};

}  // namespace lewisim
