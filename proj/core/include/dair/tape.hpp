#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dair/tensor.hpp"

namespace dair::ad {

// Handle to a node on a Tape. Only valid for the tape that produced it, until
// that tape's next reset().
struct Val {
  std::int32_t id = -1;
  bool valid() const { return id >= 0; }
};

enum class Op : std::uint8_t {
  kLeaf,
  kMatmul,
  kAdd,        // equal shapes, or rhs is a 1 x c row broadcast over r x c
  kSub,        // equal shapes
  kMul,        // equal shapes, or rhs is r x 1 / 1 x 1 broadcast over r x c
  kRelu,
  kTanh,
  kExp,
  kLog,
  kSoftplus,
  kSquare,
  kScale,      // x * aux0
  kAddScalar,  // x + aux0
  kClamp,      // clamp(x, aux0, aux1); zero gradient outside the range
  kMin,        // elementwise min of two equal-shaped inputs
  kSum,        // full reduction to 1 x 1
  kMean,       // full reduction to 1 x 1
  kSumRows,    // r x c -> r x 1
  kSoftmaxRows,
  kLayerNormRows,  // inputs: x, gain, bias; aux0 = epsilon
  kConcatCols,
  kSliceCols,  // iaux0 = first column, iaux1 = column count
};

// Reverse-mode tape rebuilt on every forward pass. Node values live in one
// arena that is reused across reset() calls, so steady-state forward passes
// allocate nothing. Single-threaded; run parallel work on separate tapes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Drops all nodes but keeps arena capacity.
  void reset();

  std::size_t node_count() const { return nodes_.size(); }

  // Leaves. `param` keeps a pointer to the tensor: backward() accumulates
  // into tensor.grad(), and the tensor must outlive the tape's current pass.
  Val param(Tensor& tensor);
  Val constant(const Tensor& tensor);
  Val constant(std::size_t rows, std::size_t cols, std::span<const double> values);
  Val scalar(double value);

  // A constant copy of an existing node's current values: gradients do not
  // flow through it.
  Val detach(Val x);

  Val matmul(Val a, Val b);
  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);
  Val relu(Val x);
  Val tanh(Val x);
  Val exp(Val x);
  Val log(Val x);
  Val softplus(Val x);
  Val square(Val x);
  Val scale(Val x, double c);
  Val add_scalar(Val x, double c);
  Val clamp(Val x, double lo, double hi);
  Val min(Val a, Val b);
  Val sum(Val x);
  Val mean(Val x);
  Val sum_rows(Val x);
  Val softmax_rows(Val x);
  Val layer_norm_rows(Val x, Val gain, Val bias, double eps);
  Val concat_cols(std::span<const Val> parts);
  Val slice_cols(Val x, std::size_t first, std::size_t count);

  std::size_t rows(Val v) const;
  std::size_t cols(Val v) const;
  std::span<const double> values(Val v) const;
  double value(Val v) const;  // 1 x 1 nodes

  // Reverse sweep from a scalar loss. Seeds the loss adjoint with 1.0,
  // accumulates adjoints for every node the loss depends on, and adds
  // parameter adjoints into their bound tensors' grad buffers. May be called
  // for several scalar heads on one pass; adjoints are per-call.
  void backward(Val loss);

  // Adjoint of a node from the most recent backward(). Zero-filled result if
  // the node was not reached.
  std::vector<double> grad_of(Val v) const;

 private:
  struct Node {
    Op op = Op::kLeaf;
    std::int32_t rows = 0;
    std::int32_t cols = 0;
    std::size_t val_off = 0;
    std::ptrdiff_t adj_off = -1;
    std::uint32_t parent_begin = 0;
    std::uint32_t parent_count = 0;
    double aux0 = 0.0;
    double aux1 = 0.0;
    std::int32_t iaux0 = 0;
    std::int32_t iaux1 = 0;
    bool needs_grad = false;
    Tensor* bound = nullptr;
  };

  Val push(Op op, std::size_t rows, std::size_t cols, std::span<const Val> parents);
  const Node& node(Val v) const;
  std::span<double> val_span(std::size_t i);
  std::span<const double> val_span(std::size_t i) const;
  std::span<double> adj_span(std::size_t i);
  bool has_adj(std::size_t i) const { return nodes_[i].adj_off >= 0; }
  void check(Val v) const;
  [[noreturn]] void shape_error(const std::string& op, Val a, Val b) const;
  void backward_node(std::size_t i);

  std::vector<Node> nodes_;
  std::vector<std::int32_t> parents_;
  std::vector<double> val_buf_;
  std::vector<double> adj_buf_;
  std::vector<std::uint8_t> active_;
};

// Name-based dispatch used by generic tooling (config-driven graphs, gradient
// checks that iterate over the op set). `aux` feeds scalar-parameterized ops.
Val forward_op(Tape& tape, const std::string& op, std::span<const Val> inputs,
               double aux = 0.0);

}  // namespace dair::ad
