#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace waydcm {

// Saturation bounds shared by the tape ops and any code that must reproduce
// their forward values exactly.
inline constexpr double kExpClamp = 50.0;   // exp argument clamp
inline constexpr double kRhoClamp = 9.0;    // correlation pre-activation clamp
inline constexpr double kLogFloor = 1e-300; // log argument floor

// Flat value container; rank is implied by shape (scalars are length-1).
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> v)
      : shape(std::move(s)), values(std::move(v)) {}

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  std::size_t numel() const { return values.size(); }
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

using NodeId = std::uint32_t;

// Reverse-mode tape over a fixed set of operations. One tape is built per
// scene: parameters enter as leaves, backward() runs once over the nodes in
// reverse creation order, and the caller reads gradients off the leaves.
class Tape {
 public:
  // Leaves. Parameters receive gradients; constants never do.
  NodeId param(Tensor value);
  NodeId constant(Tensor value);

  // y = W x + b with W (m x n), x (n), b (m).
  NodeId affine(NodeId W, NodeId x, NodeId b);

  // Elementwise; operands must match in length.
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);

  // Elementwise unaries. exp_ clamps its argument to [-50, 50]; log_ floors
  // its argument at 1e-300. Outside those ranges the local derivative is the
  // derivative of the clamped function (zero on the flat part).
  NodeId tanh_(NodeId x);
  NodeId sigmoid_(NodeId x);
  NodeId exp_(NodeId x);
  NodeId log_(NodeId x);

  // y = a * x + b elementwise with fixed (non-differentiated) scalars.
  NodeId affine_scalar(NodeId x, double a, double b);

  NodeId concat(NodeId a, NodeId b);
  NodeId slice(NodeId x, std::size_t start, std::size_t len);
  NodeId pick(NodeId x, std::size_t index);              // scalar x[index]
  NodeId stack(const std::vector<NodeId>& scalars);      // scalars -> vector
  NodeId dot(NodeId a, NodeId b);                        // scalar a . b
  NodeId sum(NodeId x);                                  // scalar sum

  // y = sum_i weights[i] * vectors[i]; weights has one entry per vector.
  NodeId weighted_sum(NodeId weights, const std::vector<NodeId>& vectors);

  // Max-subtracted softmax over the whole vector, or over the positions the
  // mask keeps (others output exactly 0). A mask keeping nothing yields the
  // all-zero vector.
  NodeId softmax(NodeId x);
  NodeId softmax_masked(NodeId x, const std::vector<char>& keep);

  // Negative log density of a bivariate Gaussian at the fixed point (tx, ty).
  // theta packs (mu_x, mu_y, log_sigma_x, log_sigma_y, pre_rho); sigmas go
  // through a clamped exp and rho through tanh of a [-9, 9]-clamped input.
  // Fused into one node because it sits in the innermost training loop.
  NodeId gauss_nll(NodeId theta, double tx, double ty);

  void backward(NodeId root);  // root must be scalar

  const Tensor& value(NodeId id) const { return nodes_[id].val; }
  // Gradient of the last backward() root w.r.t. this node (zeros if the node
  // was never reached).
  std::vector<double> gradient(NodeId id) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op : std::uint8_t {
    kLeaf, kConst, kAffine, kAdd, kSub, kMul, kTanh, kSigmoid, kExp, kLog,
    kAffineScalar, kConcat, kSlice, kPick, kStack, kDot, kSum, kWeightedSum,
    kSoftmax, kSoftmaxMasked, kGaussNll,
  };

  struct Node {
    Op op;
    bool needs_grad = false;
    std::vector<NodeId> ins;
    double a = 0.0, b = 0.0;      // affine_scalar coefficients / NLL target
    std::size_t i0 = 0, i1 = 0;   // slice window or pick index
    std::vector<char> mask;       // masked softmax
    Tensor val;
    std::vector<double> grad;     // sized on first touch during backward
  };

  NodeId push(Node node);
  Node& at(NodeId id) { return nodes_[id]; }
  std::vector<double>& grad_slot(NodeId id);
  void backward_node(NodeId id);

  std::vector<Node> nodes_;
};

}  // namespace waydcm
