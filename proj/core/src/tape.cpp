#include "dair/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dair::ad {
namespace {

std::string shape_str(std::size_t r, std::size_t c) {
  return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

double stable_softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

}  // namespace

void Tape::reset() {
  nodes_.clear();
  parents_.clear();
  val_buf_.clear();
  adj_buf_.clear();
  active_.clear();
}

const Tape::Node& Tape::node(Val v) const {
  check(v);
  return nodes_[static_cast<std::size_t>(v.id)];
}

void Tape::check(Val v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
    throw std::invalid_argument("Tape: Val does not belong to this tape (id " +
                                std::to_string(v.id) + ")");
}

void Tape::shape_error(const std::string& op, Val a, Val b) const {
  const Node& na = node(a);
  const Node& nb = node(b);
  throw std::invalid_argument(op + ": incompatible shapes " +
                              shape_str(na.rows, na.cols) + " and " +
                              shape_str(nb.rows, nb.cols));
}

std::span<double> Tape::val_span(std::size_t i) {
  const Node& n = nodes_[i];
  return {val_buf_.data() + n.val_off, static_cast<std::size_t>(n.rows) * n.cols};
}

std::span<const double> Tape::val_span(std::size_t i) const {
  const Node& n = nodes_[i];
  return {val_buf_.data() + n.val_off, static_cast<std::size_t>(n.rows) * n.cols};
}

std::span<double> Tape::adj_span(std::size_t i) {
  const Node& n = nodes_[i];
  return {adj_buf_.data() + n.adj_off, static_cast<std::size_t>(n.rows) * n.cols};
}

Val Tape::push(Op op, std::size_t rows, std::size_t cols, std::span<const Val> parents) {
  if (nodes_.size() >= static_cast<std::size_t>(INT32_MAX))
    throw std::length_error("Tape: node limit exceeded");
  Node n;
  n.op = op;
  n.rows = static_cast<std::int32_t>(rows);
  n.cols = static_cast<std::int32_t>(cols);
  n.val_off = val_buf_.size();
  n.parent_begin = static_cast<std::uint32_t>(parents_.size());
  n.parent_count = static_cast<std::uint32_t>(parents.size());
  for (Val p : parents) {
    check(p);
    parents_.push_back(p.id);
    if (nodes_[static_cast<std::size_t>(p.id)].needs_grad) n.needs_grad = true;
  }
  val_buf_.resize(val_buf_.size() + rows * cols, 0.0);
  nodes_.push_back(n);
  return Val{static_cast<std::int32_t>(nodes_.size() - 1)};
}

Val Tape::param(Tensor& tensor) {
  Val v = push(Op::kLeaf, tensor.rows(), tensor.cols(), {});
  Node& n = nodes_.back();
  n.needs_grad = true;
  n.bound = &tensor;
  auto dst = val_span(static_cast<std::size_t>(v.id));
  std::copy(tensor.data().begin(), tensor.data().end(), dst.begin());
  return v;
}

Val Tape::constant(const Tensor& tensor) {
  return constant(tensor.rows(), tensor.cols(), tensor.data());
}

Val Tape::constant(std::size_t rows, std::size_t cols, std::span<const double> values) {
  if (values.size() != rows * cols)
    throw std::invalid_argument("Tape::constant: value count " +
                                std::to_string(values.size()) + " does not match " +
                                shape_str(rows, cols));
  Val v = push(Op::kLeaf, rows, cols, {});
  auto dst = val_span(static_cast<std::size_t>(v.id));
  std::copy(values.begin(), values.end(), dst.begin());
  return v;
}

Val Tape::scalar(double value) {
  return constant(1, 1, std::span<const double>(&value, 1));
}

Val Tape::detach(Val x) {
  const Node nx = node(x);
  Val v = push(Op::kLeaf, nx.rows, nx.cols, {});
  auto src = val_span(static_cast<std::size_t>(x.id));
  auto dst = val_span(static_cast<std::size_t>(v.id));
  std::copy(src.begin(), src.end(), dst.begin());
  return v;
}

Val Tape::matmul(Val a, Val b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.cols != nb.rows) shape_error("matmul", a, b);
  const std::size_t m = na.rows, k = na.cols, n = nb.cols;
  const Val out = push(Op::kMatmul, m, n, std::array{a, b});
  auto A = val_span(static_cast<std::size_t>(a.id));
  auto B = val_span(static_cast<std::size_t>(b.id));
  auto C = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = C.data() + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double av = A[i * k + l];
      if (av == 0.0) continue;
      const double* brow = B.data() + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return out;
}

Val Tape::add(Val a, Val b) {
  const Node na = node(a);
  const Node nb = node(b);
  const bool equal = na.rows == nb.rows && na.cols == nb.cols;
  const bool row_bc = nb.rows == 1 && nb.cols == na.cols;
  if (!equal && !row_bc) shape_error("add", a, b);
  const Val out = push(Op::kAdd, na.rows, na.cols, std::array{a, b});
  auto A = val_span(static_cast<std::size_t>(a.id));
  auto B = val_span(static_cast<std::size_t>(b.id));
  auto C = val_span(static_cast<std::size_t>(out.id));
  if (equal) {
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] + B[i];
  } else {
    const std::size_t cols = na.cols;
    for (std::size_t r = 0; r < static_cast<std::size_t>(na.rows); ++r)
      for (std::size_t j = 0; j < cols; ++j) C[r * cols + j] = A[r * cols + j] + B[j];
  }
  return out;
}

Val Tape::sub(Val a, Val b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols) shape_error("sub", a, b);
  const Val out = push(Op::kSub, na.rows, na.cols, std::array{a, b});
  auto A = val_span(static_cast<std::size_t>(a.id));
  auto B = val_span(static_cast<std::size_t>(b.id));
  auto C = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] - B[i];
  return out;
}

Val Tape::mul(Val a, Val b) {
  const Node na = node(a);
  const Node nb = node(b);
  const bool equal = na.rows == nb.rows && na.cols == nb.cols;
  const bool col_bc = nb.rows == na.rows && nb.cols == 1 && na.cols > 1;
  const bool scalar_bc = nb.rows == 1 && nb.cols == 1 && !(na.rows == 1 && na.cols == 1);
  if (!equal && !col_bc && !scalar_bc) shape_error("mul", a, b);
  const Val out = push(Op::kMul, na.rows, na.cols, std::array{a, b});
  auto A = val_span(static_cast<std::size_t>(a.id));
  auto B = val_span(static_cast<std::size_t>(b.id));
  auto C = val_span(static_cast<std::size_t>(out.id));
  if (equal) {
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * B[i];
  } else if (scalar_bc) {
    for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] * B[0];
  } else {
    const std::size_t cols = na.cols;
    for (std::size_t r = 0; r < static_cast<std::size_t>(na.rows); ++r)
      for (std::size_t j = 0; j < cols; ++j) C[r * cols + j] = A[r * cols + j] * B[r];
  }
  return out;
}

Val Tape::relu(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kRelu, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] > 0.0 ? X[i] : 0.0;
  return out;
}

Val Tape::tanh(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kTanh, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::tanh(X[i]);
  return out;
}

Val Tape::exp(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kExp, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::exp(X[i]);
  return out;
}

Val Tape::log(Val x) {
  const Node nx = node(x);
  auto X = val_span(static_cast<std::size_t>(x.id));
  for (std::size_t i = 0; i < X.size(); ++i)
    if (!(X[i] > 0.0))
      throw std::domain_error("log: input element " + std::to_string(i) + " is " +
                              std::to_string(X[i]) + ", expected > 0");
  const Val out = push(Op::kLog, nx.rows, nx.cols, std::array{x});
  auto Xs = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::log(Xs[i]);
  return out;
}

Val Tape::softplus(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kSoftplus, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = stable_softplus(X[i]);
  return out;
}

Val Tape::square(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kSquare, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] * X[i];
  return out;
}

Val Tape::scale(Val x, double c) {
  const Node nx = node(x);
  const Val out = push(Op::kScale, nx.rows, nx.cols, std::array{x});
  nodes_.back().aux0 = c;
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] * c;
  return out;
}

Val Tape::add_scalar(Val x, double c) {
  const Node nx = node(x);
  const Val out = push(Op::kAddScalar, nx.rows, nx.cols, std::array{x});
  nodes_.back().aux0 = c;
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = X[i] + c;
  return out;
}

Val Tape::clamp(Val x, double lo, double hi) {
  if (lo > hi)
    throw std::invalid_argument("clamp: lo " + std::to_string(lo) + " exceeds hi " +
                                std::to_string(hi));
  const Node nx = node(x);
  const Val out = push(Op::kClamp, nx.rows, nx.cols, std::array{x});
  nodes_.back().aux0 = lo;
  nodes_.back().aux1 = hi;
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < Y.size(); ++i) Y[i] = std::clamp(X[i], lo, hi);
  return out;
}

Val Tape::min(Val a, Val b) {
  const Node na = node(a);
  const Node nb = node(b);
  if (na.rows != nb.rows || na.cols != nb.cols) shape_error("min", a, b);
  const Val out = push(Op::kMin, na.rows, na.cols, std::array{a, b});
  auto A = val_span(static_cast<std::size_t>(a.id));
  auto B = val_span(static_cast<std::size_t>(b.id));
  auto C = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t i = 0; i < C.size(); ++i) C[i] = A[i] <= B[i] ? A[i] : B[i];
  return out;
}

Val Tape::sum(Val x) {
  node(x);
  const Val out = push(Op::kSum, 1, 1, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  double s = 0.0;
  for (double v : X) s += v;
  val_span(static_cast<std::size_t>(out.id))[0] = s;
  return out;
}

Val Tape::mean(Val x) {
  const Node nx = node(x);
  if (nx.rows * nx.cols == 0) throw std::invalid_argument("mean: empty input");
  const Val out = push(Op::kMean, 1, 1, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  double s = 0.0;
  for (double v : X) s += v;
  val_span(static_cast<std::size_t>(out.id))[0] = s / static_cast<double>(X.size());
  return out;
}

Val Tape::sum_rows(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kSumRows, nx.rows, 1, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  const std::size_t cols = nx.cols;
  for (std::size_t r = 0; r < static_cast<std::size_t>(nx.rows); ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) s += X[r * cols + j];
    Y[r] = s;
  }
  return out;
}

Val Tape::softmax_rows(Val x) {
  const Node nx = node(x);
  const Val out = push(Op::kSoftmaxRows, nx.rows, nx.cols, std::array{x});
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  const std::size_t cols = nx.cols;
  for (std::size_t r = 0; r < static_cast<std::size_t>(nx.rows); ++r) {
    const double* xr = X.data() + r * cols;
    double* yr = Y.data() + r * cols;
    double mx = xr[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, xr[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      yr[j] = std::exp(xr[j] - mx);
      z += yr[j];
    }
    for (std::size_t j = 0; j < cols; ++j) yr[j] /= z;
  }
  return out;
}

Val Tape::layer_norm_rows(Val x, Val gain, Val bias, double eps) {
  const Node nx = node(x);
  const Node ng = node(gain);
  const Node nb = node(bias);
  if (ng.rows != 1 || ng.cols != nx.cols) shape_error("layer_norm", x, gain);
  if (nb.rows != 1 || nb.cols != nx.cols) shape_error("layer_norm", x, bias);
  if (eps <= 0.0) throw std::invalid_argument("layer_norm: epsilon must be positive");
  const Val out = push(Op::kLayerNormRows, nx.rows, nx.cols, std::array{x, gain, bias});
  nodes_.back().aux0 = eps;
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto G = val_span(static_cast<std::size_t>(gain.id));
  auto B = val_span(static_cast<std::size_t>(bias.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  const std::size_t cols = nx.cols;
  for (std::size_t r = 0; r < static_cast<std::size_t>(nx.rows); ++r) {
    const double* xr = X.data() + r * cols;
    double* yr = Y.data() + r * cols;
    double mu = 0.0;
    for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double d = xr[j] - mu;
      var += d * d;
    }
    var /= static_cast<double>(cols);
    const double inv = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < cols; ++j) yr[j] = (xr[j] - mu) * inv * G[j] + B[j];
  }
  return out;
}

Val Tape::concat_cols(std::span<const Val> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const Node first = node(parts[0]);
  std::size_t total = 0;
  for (Val p : parts) {
    const Node np = node(p);
    if (np.rows != first.rows) shape_error("concat_cols", parts[0], p);
    total += np.cols;
  }
  const Val out = push(Op::kConcatCols, first.rows, total, parts);
  auto Y = val_span(static_cast<std::size_t>(out.id));
  std::size_t col0 = 0;
  for (Val p : parts) {
    const Node np = nodes_[static_cast<std::size_t>(p.id)];
    auto X = val_span(static_cast<std::size_t>(p.id));
    for (std::size_t r = 0; r < static_cast<std::size_t>(np.rows); ++r)
      std::copy(X.begin() + r * np.cols, X.begin() + (r + 1) * np.cols,
                Y.begin() + r * total + col0);
    col0 += np.cols;
  }
  return out;
}

Val Tape::slice_cols(Val x, std::size_t first, std::size_t count) {
  const Node nx = node(x);
  if (first + count > static_cast<std::size_t>(nx.cols) || count == 0)
    throw std::invalid_argument("slice_cols: range [" + std::to_string(first) + ", " +
                                std::to_string(first + count) + ") out of " +
                                std::to_string(nx.cols) + " columns");
  const Val out = push(Op::kSliceCols, nx.rows, count, std::array{x});
  nodes_.back().iaux0 = static_cast<std::int32_t>(first);
  nodes_.back().iaux1 = static_cast<std::int32_t>(count);
  auto X = val_span(static_cast<std::size_t>(x.id));
  auto Y = val_span(static_cast<std::size_t>(out.id));
  for (std::size_t r = 0; r < static_cast<std::size_t>(nx.rows); ++r)
    std::copy(X.begin() + r * nx.cols + first, X.begin() + r * nx.cols + first + count,
              Y.begin() + r * count);
  return out;
}

std::size_t Tape::rows(Val v) const { return node(v).rows; }
std::size_t Tape::cols(Val v) const { return node(v).cols; }

std::span<const double> Tape::values(Val v) const {
  check(v);
  return val_span(static_cast<std::size_t>(v.id));
}

double Tape::value(Val v) const {
  const Node& n = node(v);
  if (n.rows != 1 || n.cols != 1)
    throw std::invalid_argument("Tape::value: node is " + shape_str(n.rows, n.cols) +
                                ", expected (1x1)");
  return val_span(static_cast<std::size_t>(v.id))[0];
}

void Tape::backward(Val loss) {
  const Node& ln = node(loss);
  if (ln.rows != 1 || ln.cols != 1)
    throw std::invalid_argument("backward: loss is " + shape_str(ln.rows, ln.cols) +
                                ", expected a (1x1) scalar");
  const std::size_t loss_i = static_cast<std::size_t>(loss.id);

  active_.assign(nodes_.size(), 0);
  active_[loss_i] = 1;
  for (std::size_t i = loss_i + 1; i-- > 0;) {
    if (!active_[i]) continue;
    const Node& n = nodes_[i];
    for (std::uint32_t p = 0; p < n.parent_count; ++p) {
      const auto pi = static_cast<std::size_t>(parents_[n.parent_begin + p]);
      if (nodes_[pi].needs_grad) active_[pi] = 1;
    }
  }

  std::size_t adj_total = 0;
  for (std::size_t i = 0; i <= loss_i; ++i) {
    nodes_[i].adj_off = -1;
    if (active_[i]) {
      nodes_[i].adj_off = static_cast<std::ptrdiff_t>(adj_total);
      adj_total += static_cast<std::size_t>(nodes_[i].rows) * nodes_[i].cols;
    }
  }
  for (std::size_t i = loss_i + 1; i < nodes_.size(); ++i) nodes_[i].adj_off = -1;
  adj_buf_.assign(adj_total, 0.0);
  adj_span(loss_i)[0] = 1.0;

  for (std::size_t i = loss_i + 1; i-- > 0;) {
    if (active_[i] && nodes_[i].parent_count > 0) backward_node(i);
  }

  for (std::size_t i = 0; i <= loss_i; ++i) {
    Node& n = nodes_[i];
    if (n.bound != nullptr && n.adj_off >= 0) {
      auto g = n.bound->grad();
      auto a = adj_span(i);
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += a[k];
    }
  }
}

std::vector<double> Tape::grad_of(Val v) const {
  const Node& n = node(v);
  std::vector<double> out(static_cast<std::size_t>(n.rows) * n.cols, 0.0);
  if (n.adj_off >= 0) {
    const double* src = adj_buf_.data() + n.adj_off;
    std::copy(src, src + out.size(), out.begin());
  }
  return out;
}

void Tape::backward_node(std::size_t i) {
  const Node n = nodes_[i];
  auto dY = adj_span(i);
  auto Y = val_span(i);
  const auto parent = [&](std::uint32_t k) {
    return static_cast<std::size_t>(parents_[n.parent_begin + k]);
  };
  const auto parent_active = [&](std::uint32_t k) { return has_adj(parent(k)); };

  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      const std::size_t ai = parent(0), bi = parent(1);
      const std::size_t m = nodes_[ai].rows, k = nodes_[ai].cols, nn = nodes_[bi].cols;
      auto A = val_span(ai);
      auto B = val_span(bi);
      if (has_adj(ai)) {
        auto dA = adj_span(ai);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t l = 0; l < k; ++l) {
            const double* brow = B.data() + l * nn;
            const double* dcrow = dY.data() + r * nn;
            double s = 0.0;
            for (std::size_t j = 0; j < nn; ++j) s += dcrow[j] * brow[j];
            dA[r * k + l] += s;
          }
      }
      if (has_adj(bi)) {
        auto dB = adj_span(bi);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t l = 0; l < k; ++l) {
            const double av = A[r * k + l];
            if (av == 0.0) continue;
            const double* dcrow = dY.data() + r * nn;
            double* dbrow = dB.data() + l * nn;
            for (std::size_t j = 0; j < nn; ++j) dbrow[j] += av * dcrow[j];
          }
      }
      break;
    }
    case Op::kAdd: {
      const std::size_t ai = parent(0), bi = parent(1);
      if (parent_active(0)) {
        auto dA = adj_span(ai);
        for (std::size_t k = 0; k < dY.size(); ++k) dA[k] += dY[k];
      }
      if (parent_active(1)) {
        auto dB = adj_span(bi);
        if (dB.size() == dY.size()) {
          for (std::size_t k = 0; k < dY.size(); ++k) dB[k] += dY[k];
        } else {
          const std::size_t cols = n.cols;
          for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r)
            for (std::size_t j = 0; j < cols; ++j) dB[j] += dY[r * cols + j];
        }
      }
      break;
    }
    case Op::kSub: {
      if (parent_active(0)) {
        auto dA = adj_span(parent(0));
        for (std::size_t k = 0; k < dY.size(); ++k) dA[k] += dY[k];
      }
      if (parent_active(1)) {
        auto dB = adj_span(parent(1));
        for (std::size_t k = 0; k < dY.size(); ++k) dB[k] -= dY[k];
      }
      break;
    }
    case Op::kMul: {
      const std::size_t ai = parent(0), bi = parent(1);
      auto A = val_span(ai);
      auto B = val_span(bi);
      const std::size_t cols = n.cols;
      if (B.size() == A.size()) {
        if (parent_active(0)) {
          auto dA = adj_span(ai);
          for (std::size_t k = 0; k < dY.size(); ++k) dA[k] += dY[k] * B[k];
        }
        if (parent_active(1)) {
          auto dB = adj_span(bi);
          for (std::size_t k = 0; k < dY.size(); ++k) dB[k] += dY[k] * A[k];
        }
      } else if (B.size() == 1) {
        if (parent_active(0)) {
          auto dA = adj_span(ai);
          for (std::size_t k = 0; k < dY.size(); ++k) dA[k] += dY[k] * B[0];
        }
        if (parent_active(1)) {
          auto dB = adj_span(bi);
          double s = 0.0;
          for (std::size_t k = 0; k < dY.size(); ++k) s += dY[k] * A[k];
          dB[0] += s;
        }
      } else {
        if (parent_active(0)) {
          auto dA = adj_span(ai);
          for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r)
            for (std::size_t j = 0; j < cols; ++j) dA[r * cols + j] += dY[r * cols + j] * B[r];
        }
        if (parent_active(1)) {
          auto dB = adj_span(bi);
          for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols; ++j) s += dY[r * cols + j] * A[r * cols + j];
            dB[r] += s;
          }
        }
      }
      break;
    }
    case Op::kRelu: {
      if (!parent_active(0)) break;
      auto X = val_span(parent(0));
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k)
        if (X[k] > 0.0) dX[k] += dY[k];
      break;
    }
    case Op::kTanh: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] * (1.0 - Y[k] * Y[k]);
      break;
    }
    case Op::kExp: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] * Y[k];
      break;
    }
    case Op::kLog: {
      if (!parent_active(0)) break;
      auto X = val_span(parent(0));
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] / X[k];
      break;
    }
    case Op::kSoftplus: {
      if (!parent_active(0)) break;
      auto X = val_span(parent(0));
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] * stable_sigmoid(X[k]);
      break;
    }
    case Op::kSquare: {
      if (!parent_active(0)) break;
      auto X = val_span(parent(0));
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] * 2.0 * X[k];
      break;
    }
    case Op::kScale: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k] * n.aux0;
      break;
    }
    case Op::kAddScalar: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k) dX[k] += dY[k];
      break;
    }
    case Op::kClamp: {
      if (!parent_active(0)) break;
      auto X = val_span(parent(0));
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dY.size(); ++k)
        if (X[k] > n.aux0 && X[k] < n.aux1) dX[k] += dY[k];
      break;
    }
    case Op::kMin: {
      auto A = val_span(parent(0));
      auto B = val_span(parent(1));
      if (parent_active(0)) {
        auto dA = adj_span(parent(0));
        for (std::size_t k = 0; k < dY.size(); ++k)
          if (A[k] <= B[k]) dA[k] += dY[k];
      }
      if (parent_active(1)) {
        auto dB = adj_span(parent(1));
        for (std::size_t k = 0; k < dY.size(); ++k)
          if (A[k] > B[k]) dB[k] += dY[k];
      }
      break;
    }
    case Op::kSum: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      for (std::size_t k = 0; k < dX.size(); ++k) dX[k] += dY[0];
      break;
    }
    case Op::kMean: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      const double g = dY[0] / static_cast<double>(dX.size());
      for (std::size_t k = 0; k < dX.size(); ++k) dX[k] += g;
      break;
    }
    case Op::kSumRows: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      const std::size_t cols = nodes_[parent(0)].cols;
      for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r)
        for (std::size_t j = 0; j < cols; ++j) dX[r * cols + j] += dY[r];
      break;
    }
    case Op::kSoftmaxRows: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      const std::size_t cols = n.cols;
      for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r) {
        const double* yr = Y.data() + r * cols;
        const double* dyr = dY.data() + r * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += dyr[j] * yr[j];
        double* dxr = dX.data() + r * cols;
        for (std::size_t j = 0; j < cols; ++j) dxr[j] += yr[j] * (dyr[j] - dot);
      }
      break;
    }
    case Op::kLayerNormRows: {
      const std::size_t xi = parent(0), gi = parent(1), bi = parent(2);
      auto X = val_span(xi);
      auto G = val_span(gi);
      const std::size_t cols = n.cols;
      const double eps = n.aux0;
      for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r) {
        const double* xr = X.data() + r * cols;
        const double* dyr = dY.data() + r * cols;
        double mu = 0.0;
        for (std::size_t j = 0; j < cols; ++j) mu += xr[j];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          const double d = xr[j] - mu;
          var += d * d;
        }
        var /= static_cast<double>(cols);
        const double inv = 1.0 / std::sqrt(var + eps);

        if (has_adj(bi)) {
          auto dB = adj_span(bi);
          for (std::size_t j = 0; j < cols; ++j) dB[j] += dyr[j];
        }
        if (has_adj(gi)) {
          auto dG = adj_span(gi);
          for (std::size_t j = 0; j < cols; ++j) dG[j] += dyr[j] * (xr[j] - mu) * inv;
        }
        if (has_adj(xi)) {
          auto dX = adj_span(xi);
          double mean_dh = 0.0;
          double mean_dh_xhat = 0.0;
          for (std::size_t j = 0; j < cols; ++j) {
            const double xhat = (xr[j] - mu) * inv;
            const double dh = dyr[j] * G[j];
            mean_dh += dh;
            mean_dh_xhat += dh * xhat;
          }
          mean_dh /= static_cast<double>(cols);
          mean_dh_xhat /= static_cast<double>(cols);
          double* dxr = dX.data() + r * cols;
          for (std::size_t j = 0; j < cols; ++j) {
            const double xhat = (xr[j] - mu) * inv;
            const double dh = dyr[j] * G[j];
            dxr[j] += inv * (dh - mean_dh - xhat * mean_dh_xhat);
          }
        }
      }
      break;
    }
    case Op::kConcatCols: {
      std::size_t col0 = 0;
      for (std::uint32_t k = 0; k < n.parent_count; ++k) {
        const std::size_t pi = parent(k);
        const std::size_t pcols = nodes_[pi].cols;
        if (has_adj(pi)) {
          auto dX = adj_span(pi);
          for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r)
            for (std::size_t j = 0; j < pcols; ++j)
              dX[r * pcols + j] += dY[r * n.cols + col0 + j];
        }
        col0 += pcols;
      }
      break;
    }
    case Op::kSliceCols: {
      if (!parent_active(0)) break;
      auto dX = adj_span(parent(0));
      const std::size_t pcols = nodes_[parent(0)].cols;
      const std::size_t first = static_cast<std::size_t>(n.iaux0);
      const std::size_t count = static_cast<std::size_t>(n.iaux1);
      for (std::size_t r = 0; r < static_cast<std::size_t>(n.rows); ++r)
        for (std::size_t j = 0; j < count; ++j)
          dX[r * pcols + first + j] += dY[r * count + j];
      break;
    }
  }
}

Val forward_op(Tape& tape, const std::string& op, std::span<const Val> inputs, double aux) {
  const auto need = [&](std::size_t n) {
    if (inputs.size() != n)
      throw std::invalid_argument("forward_op: '" + op + "' expects " + std::to_string(n) +
                                  " inputs, got " + std::to_string(inputs.size()));
  };
  if (op == "matmul") { need(2); return tape.matmul(inputs[0], inputs[1]); }
  if (op == "add") { need(2); return tape.add(inputs[0], inputs[1]); }
  if (op == "elementwise-mul") { need(2); return tape.mul(inputs[0], inputs[1]); }
  if (op == "relu") { need(1); return tape.relu(inputs[0]); }
  if (op == "tanh") { need(1); return tape.tanh(inputs[0]); }
  if (op == "exp") { need(1); return tape.exp(inputs[0]); }
  if (op == "log") { need(1); return tape.log(inputs[0]); }
  if (op == "square") { need(1); return tape.square(inputs[0]); }
  if (op == "sum") { need(1); return tape.sum(inputs[0]); }
  if (op == "mean") { need(1); return tape.mean(inputs[0]); }
  if (op == "softmax-over-last-axis") { need(1); return tape.softmax_rows(inputs[0]); }
  if (op == "layer-norm") {
    need(3);
    return tape.layer_norm_rows(inputs[0], inputs[1], inputs[2], aux > 0.0 ? aux : 1e-5);
  }
  if (op == "scalar-scale") { need(1); return tape.scale(inputs[0], aux); }
  throw std::invalid_argument("forward_op: unknown op '" + op + "'");
}

}  // namespace dair::ad
