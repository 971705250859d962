#include "waydcm/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "waydcm/errors.hpp"

namespace waydcm {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double clamp(double x, double lo, double hi) { return std::min(std::max(x, lo), hi); }

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::vector(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  if (v.size() != rows * cols) throw NumericError("matrix data does not match shape");
  return Tensor({rows, cols}, std::move(v));
}

NodeId Tape::push(Node node) {
  for (NodeId in : node.ins) node.needs_grad = node.needs_grad || nodes_[in].needs_grad;
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::param(Tensor value) {
  Node n;
  n.op = Op::kLeaf;
  n.needs_grad = true;
  n.val = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(Tensor value) {
  Node n;
  n.op = Op::kConst;
  n.val = std::move(value);
  nodes_.push_back(std::move(n));
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::affine(NodeId W, NodeId x, NodeId b) {
  const Tensor& w = nodes_[W].val;
  const Tensor& xv = nodes_[x].val;
  const Tensor& bv = nodes_[b].val;
  const std::size_t m = w.rows(), k = w.cols();
  if (xv.numel() != k || bv.numel() != m)
    throw NumericError("affine: shape mismatch");
  Node n;
  n.op = Op::kAffine;
  n.ins = {W, x, b};
  n.val = Tensor::zeros({m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = bv.values[i];
    const double* row = &w.values[i * k];
    for (std::size_t j = 0; j < k; ++j) acc += row[j] * xv.values[j];
    n.val.values[i] = acc;
  }
  return push(std::move(n));
}

namespace {
void check_same_length(const Tensor& a, const Tensor& b, const char* what) {
  if (a.numel() != b.numel()) throw NumericError(std::string(what) + ": length mismatch");
}
}  // namespace

NodeId Tape::add(NodeId a, NodeId b) {
  check_same_length(nodes_[a].val, nodes_[b].val, "add");
  Node n;
  n.op = Op::kAdd;
  n.ins = {a, b};
  n.val = nodes_[a].val;
  for (std::size_t i = 0; i < n.val.numel(); ++i) n.val.values[i] += nodes_[b].val.values[i];
  return push(std::move(n));
}

NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_length(nodes_[a].val, nodes_[b].val, "sub");
  Node n;
  n.op = Op::kSub;
  n.ins = {a, b};
  n.val = nodes_[a].val;
  for (std::size_t i = 0; i < n.val.numel(); ++i) n.val.values[i] -= nodes_[b].val.values[i];
  return push(std::move(n));
}

NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_length(nodes_[a].val, nodes_[b].val, "mul");
  Node n;
  n.op = Op::kMul;
  n.ins = {a, b};
  n.val = nodes_[a].val;
  for (std::size_t i = 0; i < n.val.numel(); ++i) n.val.values[i] *= nodes_[b].val.values[i];
  return push(std::move(n));
}

NodeId Tape::tanh_(NodeId x) {
  Node n;
  n.op = Op::kTanh;
  n.ins = {x};
  n.val = nodes_[x].val;
  for (double& v : n.val.values) v = std::tanh(v);
  return push(std::move(n));
}

NodeId Tape::sigmoid_(NodeId x) {
  Node n;
  n.op = Op::kSigmoid;
  n.ins = {x};
  n.val = nodes_[x].val;
  for (double& v : n.val.values) v = 1.0 / (1.0 + std::exp(-v));
  return push(std::move(n));
}

NodeId Tape::exp_(NodeId x) {
  Node n;
  n.op = Op::kExp;
  n.ins = {x};
  n.val = nodes_[x].val;
  for (double& v : n.val.values) v = std::exp(clamp(v, -kExpClamp, kExpClamp));
  return push(std::move(n));
}

NodeId Tape::log_(NodeId x) {
  Node n;
  n.op = Op::kLog;
  n.ins = {x};
  n.val = nodes_[x].val;
  for (double& v : n.val.values) v = std::log(std::max(v, kLogFloor));
  return push(std::move(n));
}

NodeId Tape::affine_scalar(NodeId x, double a, double b) {
  Node n;
  n.op = Op::kAffineScalar;
  n.ins = {x};
  n.a = a;
  n.b = b;
  n.val = nodes_[x].val;
  for (double& v : n.val.values) v = a * v + b;
  return push(std::move(n));
}

NodeId Tape::concat(NodeId a, NodeId b) {
  Node n;
  n.op = Op::kConcat;
  n.ins = {a, b};
  n.val = Tensor::zeros({nodes_[a].val.numel() + nodes_[b].val.numel()});
  std::copy(nodes_[a].val.values.begin(), nodes_[a].val.values.end(), n.val.values.begin());
  std::copy(nodes_[b].val.values.begin(), nodes_[b].val.values.end(),
            n.val.values.begin() + static_cast<std::ptrdiff_t>(nodes_[a].val.numel()));
  return push(std::move(n));
}

NodeId Tape::slice(NodeId x, std::size_t start, std::size_t len) {
  if (start + len > nodes_[x].val.numel()) throw NumericError("slice: out of range");
  Node n;
  n.op = Op::kSlice;
  n.ins = {x};
  n.i0 = start;
  n.i1 = len;
  n.val = Tensor::zeros({len});
  std::copy_n(nodes_[x].val.values.begin() + static_cast<std::ptrdiff_t>(start), len,
              n.val.values.begin());
  return push(std::move(n));
}

NodeId Tape::pick(NodeId x, std::size_t index) {
  if (index >= nodes_[x].val.numel()) throw NumericError("pick: index out of range");
  Node n;
  n.op = Op::kPick;
  n.ins = {x};
  n.i0 = index;
  n.val = Tensor::scalar(nodes_[x].val.values[index]);
  return push(std::move(n));
}

NodeId Tape::stack(const std::vector<NodeId>& scalars) {
  Node n;
  n.op = Op::kStack;
  n.ins = scalars;
  n.val = Tensor::zeros({scalars.size()});
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    if (nodes_[scalars[i]].val.numel() != 1) throw NumericError("stack: inputs must be scalars");
    n.val.values[i] = nodes_[scalars[i]].val.values[0];
  }
  return push(std::move(n));
}

NodeId Tape::dot(NodeId a, NodeId b) {
  check_same_length(nodes_[a].val, nodes_[b].val, "dot");
  Node n;
  n.op = Op::kDot;
  n.ins = {a, b};
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a].val.numel(); ++i)
    acc += nodes_[a].val.values[i] * nodes_[b].val.values[i];
  n.val = Tensor::scalar(acc);
  return push(std::move(n));
}

NodeId Tape::sum(NodeId x) {
  Node n;
  n.op = Op::kSum;
  n.ins = {x};
  double acc = 0.0;
  for (double v : nodes_[x].val.values) acc += v;
  n.val = Tensor::scalar(acc);
  return push(std::move(n));
}

NodeId Tape::weighted_sum(NodeId weights, const std::vector<NodeId>& vectors) {
  if (nodes_[weights].val.numel() != vectors.size())
    throw NumericError("weighted_sum: one weight per vector required");
  if (vectors.empty()) throw NumericError("weighted_sum: no vectors");
  const std::size_t d = nodes_[vectors[0]].val.numel();
  Node n;
  n.op = Op::kWeightedSum;
  n.ins.reserve(vectors.size() + 1);
  n.ins.push_back(weights);
  n.ins.insert(n.ins.end(), vectors.begin(), vectors.end());
  n.val = Tensor::zeros({d});
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const auto& v = nodes_[vectors[i]].val;
    if (v.numel() != d) throw NumericError("weighted_sum: vector length mismatch");
    const double w = nodes_[weights].val.values[i];
    for (std::size_t j = 0; j < d; ++j) n.val.values[j] += w * v.values[j];
  }
  return push(std::move(n));
}

NodeId Tape::softmax(NodeId x) {
  Node n;
  n.op = Op::kSoftmax;
  n.ins = {x};
  const auto& v = nodes_[x].val.values;
  n.val = Tensor::zeros({v.size()});
  const double top = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    n.val.values[i] = std::exp(v[i] - top);
    sum += n.val.values[i];
  }
  for (double& p : n.val.values) p /= sum;
  return push(std::move(n));
}

NodeId Tape::softmax_masked(NodeId x, const std::vector<char>& keep) {
  const auto& v = nodes_[x].val.values;
  if (keep.size() != v.size()) throw NumericError("masked softmax: mask length mismatch");
  Node n;
  n.op = Op::kSoftmaxMasked;
  n.ins = {x};
  n.mask = keep;
  n.val = Tensor::zeros({v.size()});
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (keep[i]) top = std::max(top, v[i]);
  if (std::isinf(top)) return push(std::move(n));  // nothing kept: all zero
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!keep[i]) continue;
    n.val.values[i] = std::exp(v[i] - top);
    sum += n.val.values[i];
  }
  for (std::size_t i = 0; i < v.size(); ++i)
    if (keep[i]) n.val.values[i] /= sum;
  return push(std::move(n));
}

NodeId Tape::gauss_nll(NodeId theta, double tx, double ty) {
  if (nodes_[theta].val.numel() != 5)
    throw NumericError("gauss_nll: theta must pack 5 parameters");
  Node n;
  n.op = Op::kGaussNll;
  n.ins = {theta};
  n.a = tx;
  n.b = ty;
  const auto& t = nodes_[theta].val.values;
  const double sx = std::exp(clamp(t[2], -kExpClamp, kExpClamp));
  const double sy = std::exp(clamp(t[3], -kExpClamp, kExpClamp));
  const double rho = std::tanh(clamp(t[4], -kRhoClamp, kRhoClamp));
  const double c = 1.0 - rho * rho;
  const double u = (tx - t[0]) / sx;
  const double v = (ty - t[1]) / sy;
  const double q = u * u - 2.0 * rho * u * v + v * v;
  const double nll = std::log(kTwoPi) + std::log(sx) + std::log(sy) +
                     0.5 * std::log(c) + q / (2.0 * c);
  n.val = Tensor::scalar(nll);
  return push(std::move(n));
}

std::vector<double>& Tape::grad_slot(NodeId id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.val.numel(), 0.0);
  return n.grad;
}

std::vector<double> Tape::gradient(NodeId id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty()) return std::vector<double>(n.val.numel(), 0.0);
  return n.grad;
}

void Tape::backward(NodeId root) {
  if (nodes_[root].val.numel() != 1)
    throw NumericError("backward: root must be a scalar");
  grad_slot(root)[0] += 1.0;
  for (NodeId id = root + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (n.grad.empty() || !n.needs_grad) continue;  // never reached or constant
    backward_node(id);
  }
}

void Tape::backward_node(NodeId id) {
  Node& n = nodes_[id];
  const std::vector<double>& gy = n.grad;
  auto needs = [&](std::size_t slot) { return nodes_[n.ins[slot]].needs_grad; };

  switch (n.op) {
    case Op::kLeaf:
    case Op::kConst:
      break;
    case Op::kAffine: {
      const Tensor& w = nodes_[n.ins[0]].val;
      const Tensor& x = nodes_[n.ins[1]].val;
      const std::size_t m = w.rows(), k = w.cols();
      if (needs(0)) {
        auto& gw = grad_slot(n.ins[0]);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < k; ++j) gw[i * k + j] += gy[i] * x.values[j];
      }
      if (needs(1)) {
        auto& gx = grad_slot(n.ins[1]);
        for (std::size_t i = 0; i < m; ++i) {
          const double* row = &w.values[i * k];
          for (std::size_t j = 0; j < k; ++j) gx[j] += row[j] * gy[i];
        }
      }
      if (needs(2)) {
        auto& gb = grad_slot(n.ins[2]);
        for (std::size_t i = 0; i < m; ++i) gb[i] += gy[i];
      }
      break;
    }
    case Op::kAdd: {
      for (std::size_t s = 0; s < 2; ++s) {
        if (!needs(s)) continue;
        auto& g = grad_slot(n.ins[s]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
      break;
    }
    case Op::kSub: {
      if (needs(0)) {
        auto& g = grad_slot(n.ins[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i];
      }
      if (needs(1)) {
        auto& g = grad_slot(n.ins[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] -= gy[i];
      }
      break;
    }
    case Op::kMul: {
      const auto& av = nodes_[n.ins[0]].val.values;
      const auto& bv = nodes_[n.ins[1]].val.values;
      if (needs(0)) {
        auto& g = grad_slot(n.ins[0]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * bv[i];
      }
      if (needs(1)) {
        auto& g = grad_slot(n.ins[1]);
        for (std::size_t i = 0; i < gy.size(); ++i) g[i] += gy[i] * av[i];
      }
      break;
    }
    case Op::kTanh: {
      if (!needs(0)) break;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < gy.size(); ++i)
        g[i] += gy[i] * (1.0 - n.val.values[i] * n.val.values[i]);
      break;
    }
    case Op::kSigmoid: {
      if (!needs(0)) break;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < gy.size(); ++i)
        g[i] += gy[i] * n.val.values[i] * (1.0 - n.val.values[i]);
      break;
    }
    case Op::kExp: {
      if (!needs(0)) break;
      const auto& xv = nodes_[n.ins[0]].val.values;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const bool flat = xv[i] < -kExpClamp || xv[i] > kExpClamp;
        g[i] += flat ? 0.0 : gy[i] * n.val.values[i];
      }
      break;
    }
    case Op::kLog: {
      if (!needs(0)) break;
      const auto& xv = nodes_[n.ins[0]].val.values;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < gy.size(); ++i) {
        const double x = std::max(xv[i], kLogFloor);
        g[i] += xv[i] < kLogFloor ? 0.0 : gy[i] / x;
      }
      break;
    }
    case Op::kAffineScalar: {
      if (!needs(0)) break;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < gy.size(); ++i) g[i] += n.a * gy[i];
      break;
    }
    case Op::kConcat: {
      const std::size_t na = nodes_[n.ins[0]].val.numel();
      if (needs(0)) {
        auto& g = grad_slot(n.ins[0]);
        for (std::size_t i = 0; i < na; ++i) g[i] += gy[i];
      }
      if (needs(1)) {
        auto& g = grad_slot(n.ins[1]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gy[na + i];
      }
      break;
    }
    case Op::kSlice: {
      if (!needs(0)) break;
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < n.i1; ++i) g[n.i0 + i] += gy[i];
      break;
    }
    case Op::kPick: {
      if (!needs(0)) break;
      grad_slot(n.ins[0])[n.i0] += gy[0];
      break;
    }
    case Op::kStack: {
      for (std::size_t i = 0; i < n.ins.size(); ++i)
        if (nodes_[n.ins[i]].needs_grad) grad_slot(n.ins[i])[0] += gy[i];
      break;
    }
    case Op::kDot: {
      const auto& av = nodes_[n.ins[0]].val.values;
      const auto& bv = nodes_[n.ins[1]].val.values;
      if (needs(0)) {
        auto& g = grad_slot(n.ins[0]);
        for (std::size_t i = 0; i < av.size(); ++i) g[i] += gy[0] * bv[i];
      }
      if (needs(1)) {
        auto& g = grad_slot(n.ins[1]);
        for (std::size_t i = 0; i < bv.size(); ++i) g[i] += gy[0] * av[i];
      }
      break;
    }
    case Op::kSum: {
      if (!needs(0)) break;
      auto& g = grad_slot(n.ins[0]);
      for (double& gi : g) gi += gy[0];
      break;
    }
    case Op::kWeightedSum: {
      const auto& wv = nodes_[n.ins[0]].val.values;
      for (std::size_t i = 0; i < wv.size(); ++i) {
        const auto& vv = nodes_[n.ins[1 + i]].val.values;
        if (needs(0)) {
          double acc = 0.0;
          for (std::size_t j = 0; j < vv.size(); ++j) acc += gy[j] * vv[j];
          grad_slot(n.ins[0])[i] += acc;
        }
        if (nodes_[n.ins[1 + i]].needs_grad) {
          auto& g = grad_slot(n.ins[1 + i]);
          for (std::size_t j = 0; j < vv.size(); ++j) g[j] += wv[i] * gy[j];
        }
      }
      break;
    }
    case Op::kSoftmax: {
      if (!needs(0)) break;
      const auto& p = n.val.values;
      double inner = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) inner += gy[i] * p[i];
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < p.size(); ++i) g[i] += p[i] * (gy[i] - inner);
      break;
    }
    case Op::kSoftmaxMasked: {
      if (!needs(0)) break;
      const auto& p = n.val.values;
      double inner = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i)
        if (n.mask[i]) inner += gy[i] * p[i];
      auto& g = grad_slot(n.ins[0]);
      for (std::size_t i = 0; i < p.size(); ++i)
        if (n.mask[i]) g[i] += p[i] * (gy[i] - inner);
      break;
    }
    case Op::kGaussNll: {
      if (!needs(0)) break;
      const auto& t = nodes_[n.ins[0]].val.values;
      const bool fx = t[2] < -kExpClamp || t[2] > kExpClamp;
      const bool fy = t[3] < -kExpClamp || t[3] > kExpClamp;
      const bool fr = t[4] < -kRhoClamp || t[4] > kRhoClamp;
      const double sx = std::exp(clamp(t[2], -kExpClamp, kExpClamp));
      const double sy = std::exp(clamp(t[3], -kExpClamp, kExpClamp));
      const double rho = std::tanh(clamp(t[4], -kRhoClamp, kRhoClamp));
      const double c = 1.0 - rho * rho;
      const double u = (n.a - t[0]) / sx;
      const double v = (n.b - t[1]) / sy;
      const double q = u * u - 2.0 * rho * u * v + v * v;
      auto& g = grad_slot(n.ins[0]);
      const double gy0 = gy[0];
      g[0] += gy0 * (-(u - rho * v) / (sx * c));
      g[1] += gy0 * (-(v - rho * u) / (sy * c));
      g[2] += fx ? 0.0 : gy0 * (1.0 - u * (u - rho * v) / c);
      g[3] += fy ? 0.0 : gy0 * (1.0 - v * (v - rho * u) / c);
      // d/d(pre_rho) folds tanh' = c into the rho derivative.
      g[4] += fr ? 0.0 : gy0 * (-rho - u * v + q * rho / c);
      break;
    }
  }
}

}  // namespace waydcm
