#pragma once

// Dense row-major tensor with reverse-mode automatic differentiation.
//
// A TensorT<S> is a cheap handle onto a shared node. Ops build the graph
// eagerly while grad mode is on; backward() walks it once in reverse
// topological order and accumulates into .grad of every node that requires
// grad. Gradients from one backward pass are kept in per-pass scratch
// buffers, so running backward twice on the same graph doubles leaf
// gradients exactly.
//
// S is float for training and double for the finite-difference harness;
// both instantiate the same code paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fsmb/errors.hpp"

namespace fsmb {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// Global switch; evaluation paths disable graph recording via NoGradGuard.
class GradMode {
 public:
  static bool enabled() { return enabled_; }
  static void set_enabled(bool on) { enabled_ = on; }

 private:
  static inline thread_local bool enabled_ = true;
};

struct NoGradGuard {
  NoGradGuard() : prev_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(prev_); }

 private:
  bool prev_;
};

template <class S>
struct TensorNode {
  Shape shape;
  std::vector<S> values;
  std::vector<S> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Receives this node's upstream gradient and adds each parent's share into
  // the aligned scratch buffer. Captures hold whatever forward state the rule
  // needs.
  std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)> backward_fn;
};

template <class S>
class TensorT {
 public:
  TensorT() = default;

  static TensorT from_values(Shape shape, std::vector<S> values) {
    if (shape_numel(shape) != values.size()) {
      throw DimensionError("tensor data length " + std::to_string(values.size()) +
                           " does not match shape " + shape_str(shape));
    }
    TensorT t;
    t.node_ = std::make_shared<TensorNode<S>>();
    t.node_->shape = std::move(shape);
    t.node_->values = std::move(values);
    return t;
  }

  static TensorT zeros(Shape shape) {
    const std::size_t n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<S>(n, S(0)));
  }

  static TensorT full(Shape shape, S value) {
    const std::size_t n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<S>(n, value));
  }

  static TensorT scalar(S value) { return from_values({1}, {value}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t size() const { return node_->values.size(); }
  std::size_t rank() const { return node_->shape.size(); }

  std::size_t rows() const {
    require_rank2("rows()");
    return node_->shape[0];
  }
  std::size_t cols() const {
    require_rank2("cols()");
    return node_->shape[1];
  }

  const std::vector<S>& values() const { return node_->values; }
  std::vector<S>& mutable_values() { return node_->values; }
  const std::vector<S>& grad() const { return node_->grad; }

  S operator()(std::size_t r, std::size_t c) const {
    require_rank2("operator()");
    return node_->values[r * node_->shape[1] + c];
  }

  S item() const {
    if (size() != 1) {
      throw ContractError("item() requires a single-element tensor, got " + shape_str(shape()));
    }
    return node_->values[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  TensorT& set_requires_grad(bool on) {
    node_->requires_grad = on;
    return *this;
  }

  void zero_grad() {
    node_->grad.assign(node_->values.size(), S(0));
  }

  void backward() const {
    if (size() != 1) {
      throw ContractError("backward() requires a scalar loss, got " + shape_str(shape()));
    }
    // Reverse topological order: children (consumers) come before parents.
    std::vector<TensorNode<S>*> order;
    {
      std::unordered_map<TensorNode<S>*, int> mark;  // 0 new, 1 open, 2 done
      std::vector<std::pair<TensorNode<S>*, std::size_t>> stack{{node_.get(), 0}};
      mark[node_.get()] = 1;
      while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
          TensorNode<S>* p = n->parents[next++].get();
          if (mark[p] == 0) {
            mark[p] = 1;
            stack.emplace_back(p, 0);
          }
        } else {
          order.push_back(n);
          stack.pop_back();
        }
      }
      std::reverse(order.begin(), order.end());
    }

    std::unordered_map<TensorNode<S>*, std::vector<S>> flow;
    flow[node_.get()] = {S(1)};
    for (TensorNode<S>* n : order) {
      auto it = flow.find(n);
      if (it == flow.end()) continue;  // not on a path from the loss
      const std::vector<S>& g = it->second;
      if (n->requires_grad) {
        if (n->grad.empty()) n->grad.assign(n->values.size(), S(0));
        for (std::size_t i = 0; i < g.size(); ++i) n->grad[i] += g[i];
      }
      if (n->backward_fn) {
        std::vector<std::vector<S>*> parent_bufs(n->parents.size());
        for (std::size_t i = 0; i < n->parents.size(); ++i) {
          auto& buf = flow[n->parents[i].get()];
          if (buf.empty()) buf.assign(n->parents[i]->values.size(), S(0));
          parent_bufs[i] = &buf;
        }
        n->backward_fn(g, parent_bufs);
      }
    }
  }

  std::shared_ptr<TensorNode<S>> node() const { return node_; }

 private:
  void require_rank2(const char* what) const {
    if (node_->shape.size() != 2) {
      throw DimensionError(std::string(what) + " requires a rank-2 tensor, got " +
                           shape_str(node_->shape));
    }
  }

  std::shared_ptr<TensorNode<S>> node_;
};

// Builds an op result node. Parents and the backward rule are only retained
// when grad mode is on and some input is tracked.
template <class S>
TensorT<S> make_op(Shape shape, std::vector<S> values,
                   std::vector<TensorT<S>> inputs,
                   std::function<void(const std::vector<S>&, const std::vector<std::vector<S>*>&)>
                       backward_fn) {
  TensorT<S> out = TensorT<S>::from_values(std::move(shape), std::move(values));
  bool tracked = false;
  for (const auto& in : inputs) tracked = tracked || in.requires_grad();
  if (GradMode::enabled() && tracked) {
    out.set_requires_grad(true);
    auto node = out.node();
    node->parents.reserve(inputs.size());
    for (const auto& in : inputs) node->parents.push_back(in.node());
    node->backward_fn = std::move(backward_fn);
  }
  return out;
}

namespace detail {

template <class S>
void check_same_shape(const TensorT<S>& a, const TensorT<S>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

enum class BinKind { add, sub, mul };

// add/sub/mul share one skeleton; broadcasting is limited to a one-element
// tensor against anything.
template <class S>
TensorT<S> binary_elementwise(const TensorT<S>& a, const TensorT<S>& b, BinKind kind,
                              const char* name) {
  const bool a_scalar = a.size() == 1;
  const bool b_scalar = b.size() == 1;
  if (!a_scalar && !b_scalar) check_same_shape(a, b, name);

  const Shape out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  const std::size_t n = shape_numel(out_shape);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<S> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const S x = av[a_scalar ? 0 : i];
    const S y = bv[b_scalar ? 0 : i];
    out[i] = kind == BinKind::add ? x + y : kind == BinKind::sub ? x - y : x * y;
  }

  std::vector<S> a_saved = kind == BinKind::mul ? av : std::vector<S>{};
  std::vector<S> b_saved = kind == BinKind::mul ? bv : std::vector<S>{};
  return make_op<S>(
      out_shape, std::move(out), {a, b},
      [kind, a_scalar, b_scalar, a_saved = std::move(a_saved), b_saved = std::move(b_saved)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& ga = *parents[0];
        auto& gb = *parents[1];
        for (std::size_t i = 0; i < g.size(); ++i) {
          S da, db;
          switch (kind) {
            case BinKind::add:
              da = g[i];
              db = g[i];
              break;
            case BinKind::sub:
              da = g[i];
              db = -g[i];
              break;
            default:
              da = g[i] * b_saved[b_scalar ? 0 : i];
              db = g[i] * a_saved[a_scalar ? 0 : i];
          }
          ga[a_scalar ? 0 : i] += da;
          gb[b_scalar ? 0 : i] += db;
        }
      });
}

template <class S, class Fwd, class Dfn>
TensorT<S> unary_elementwise(const TensorT<S>& a, Fwd fwd, Dfn dfn) {
  const auto& av = a.values();
  std::vector<S> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = fwd(av[i]);
  std::vector<S> saved = av;
  return make_op<S>(a.shape(), std::move(out), {a},
                    [dfn, saved = std::move(saved)](const std::vector<S>& g,
                                                    const std::vector<std::vector<S>*>& parents) {
                      auto& ga = *parents[0];
                      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfn(saved[i]);
                    });
}

}  // namespace detail

template <class S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_elementwise(a, b, detail::BinKind::add, "add");
}

template <class S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_elementwise(a, b, detail::BinKind::sub, "sub");
}

template <class S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_elementwise(a, b, detail::BinKind::mul, "mul");
}

template <class S>
TensorT<S> neg(const TensorT<S>& a) {
  return detail::unary_elementwise(
      a, [](S x) { return -x; }, [](S) { return S(-1); });
}

template <class S>
TensorT<S> exp_op(const TensorT<S>& a) {
  return detail::unary_elementwise(
      a, [](S x) { return std::exp(x); }, [](S x) { return std::exp(x); });
}

template <class S>
TensorT<S> log_op(const TensorT<S>& a) {
  for (S x : a.values()) {
    if (!(x > S(0))) {
      throw DomainError("log of non-positive value " + std::to_string(static_cast<double>(x)));
    }
  }
  return detail::unary_elementwise(
      a, [](S x) { return std::log(x); }, [](S x) { return S(1) / x; });
}

template <class S>
TensorT<S> relu(const TensorT<S>& a) {
  return detail::unary_elementwise(
      a, [](S x) { return x > S(0) ? x : S(0); }, [](S x) { return x > S(0) ? S(1) : S(0); });
}

template <class S>
TensorT<S> leaky_relu(const TensorT<S>& a, S slope) {
  return detail::unary_elementwise(
      a, [slope](S x) { return x > S(0) ? x : slope * x; },
      [slope](S x) { return x > S(0) ? S(1) : slope; });
}

// Multiply by a plain (untracked) constant.
template <class S>
TensorT<S> scale(const TensorT<S>& a, S c) {
  return detail::unary_elementwise(
      a, [c](S x) { return c * x; }, [c](S) { return c; });
}

template <class S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  const auto& av = a.values();
  const auto& bv = b.values();
  std::vector<S> out(m * n, S(0));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t kk = 0; kk < k; ++kk) {
      const S aik = av[i * k + kk];
      const S* brow = bv.data() + kk * n;
      S* orow = out.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  std::vector<S> a_saved = av, b_saved = bv;
  return make_op<S>(
      {m, n}, std::move(out), {a, b},
      [m, k, n, a_saved = std::move(a_saved), b_saved = std::move(b_saved)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& ga = *parents[0];  // dA = G * B^T
        auto& gb = *parents[1];  // dB = A^T * G
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const S gij = g[i * n + j];
            for (std::size_t kk = 0; kk < k; ++kk) {
              ga[i * k + kk] += gij * b_saved[kk * n + j];
              gb[kk * n + j] += a_saved[i * k + kk] * gij;
            }
          }
        }
      });
}

template <class S>
TensorT<S> transpose(const TensorT<S>& a) {
  const std::size_t m = a.rows(), n = a.cols();
  const auto& av = a.values();
  std::vector<S> out(m * n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  return make_op<S>({n, m}, std::move(out), {a},
                    [m, n](const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
                      auto& ga = *parents[0];
                      for (std::size_t i = 0; i < m; ++i)
                        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                    });
}

// x[B x in] * W^T[in x out] + b, the affine layer used by the encoder and
// the linear classification head.
template <class S>
TensorT<S> linear(const TensorT<S>& x, const TensorT<S>& weight, const TensorT<S>& bias) {
  if (x.rank() != 2 || weight.rank() != 2 || x.cols() != weight.cols()) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + " vs weight " +
                         shape_str(weight.shape()));
  }
  const std::size_t batch = x.rows(), in = x.cols(), out_dim = weight.rows();
  if (bias.size() != out_dim) {
    throw DimensionError("linear: bias " + shape_str(bias.shape()) + " vs weight " +
                         shape_str(weight.shape()));
  }
  const auto& xv = x.values();
  const auto& wv = weight.values();
  const auto& bv = bias.values();
  std::vector<S> out(batch * out_dim);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t o = 0; o < out_dim; ++o) {
      S acc = bv[o];
      const S* xrow = xv.data() + i * in;
      const S* wrow = wv.data() + o * in;
      for (std::size_t j = 0; j < in; ++j) acc += xrow[j] * wrow[j];
      out[i * out_dim + o] = acc;
    }
  }
  std::vector<S> x_saved = xv, w_saved = wv;
  return make_op<S>(
      {batch, out_dim}, std::move(out), {x, weight, bias},
      [batch, in, out_dim, x_saved = std::move(x_saved), w_saved = std::move(w_saved)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& gx = *parents[0];
        auto& gw = *parents[1];
        auto& gb = *parents[2];
        for (std::size_t i = 0; i < batch; ++i) {
          for (std::size_t o = 0; o < out_dim; ++o) {
            const S gio = g[i * out_dim + o];
            gb[o] += gio;
            for (std::size_t j = 0; j < in; ++j) {
              gx[i * in + j] += gio * w_saved[o * in + j];
              gw[o * in + j] += gio * x_saved[i * in + j];
            }
          }
        }
      });
}

namespace detail {

enum class ReduceKind { sum, mean, max };

// Collapses `axis` of a rank-1/2 tensor; the axis disappears from the shape
// (a rank-1 input reduces to shape {1}).
template <class S>
TensorT<S> reduce_axis(const TensorT<S>& a, std::size_t axis, ReduceKind kind) {
  if (a.rank() < 1 || a.rank() > 2 || axis >= a.rank()) {
    throw DimensionError("reduce: invalid axis " + std::to_string(axis) + " for shape " +
                         shape_str(a.shape()));
  }
  const Shape& in_shape = a.shape();
  Shape out_shape;
  for (std::size_t d = 0; d < in_shape.size(); ++d)
    if (d != axis) out_shape.push_back(in_shape[d]);
  if (out_shape.empty()) out_shape = {1};

  const std::size_t reduce_n = in_shape[axis];
  if (reduce_n == 0) throw DomainError("reduce over empty axis");
  const std::size_t out_n = shape_numel(out_shape);
  // index mapping: for rank-2 [m x n], axis 0 groups by column, axis 1 by row.
  const std::size_t inner = (a.rank() == 2 && axis == 0) ? in_shape[1] : 1;
  const std::size_t stride = (a.rank() == 2 && axis == 0) ? in_shape[1] : 1;

  const auto& av = a.values();
  std::vector<S> out(out_n);
  std::vector<std::size_t> argmax(kind == ReduceKind::max ? out_n : 0);
  for (std::size_t o = 0; o < out_n; ++o) {
    const std::size_t base = (inner == 1) ? o * reduce_n : o;
    if (kind == ReduceKind::max) {
      S best = -std::numeric_limits<S>::infinity();
      std::size_t best_i = 0;
      for (std::size_t r = 0; r < reduce_n; ++r) {
        const S v = av[base + r * stride];
        if (v > best) {
          best = v;
          best_i = base + r * stride;
        }
      }
      out[o] = best;
      argmax[o] = best_i;
    } else {
      S acc = S(0);
      for (std::size_t r = 0; r < reduce_n; ++r) acc += av[base + r * stride];
      out[o] = kind == ReduceKind::mean ? acc / S(reduce_n) : acc;
    }
  }

  return make_op<S>(
      out_shape, std::move(out), {a},
      [kind, reduce_n, inner, stride, argmax = std::move(argmax)](
          const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& ga = *parents[0];
        for (std::size_t o = 0; o < g.size(); ++o) {
          if (kind == ReduceKind::max) {
            ga[argmax[o]] += g[o];
            continue;
          }
          const S go = kind == ReduceKind::mean ? g[o] / S(reduce_n) : g[o];
          const std::size_t base = (inner == 1) ? o * reduce_n : o;
          for (std::size_t r = 0; r < reduce_n; ++r) ga[base + r * stride] += go;
        }
      });
}

template <class S>
TensorT<S> reduce_all(const TensorT<S>& a, ReduceKind kind) {
  const auto& av = a.values();
  if (av.empty()) throw DomainError("reduce over empty tensor");
  S acc;
  std::size_t best_i = 0;
  if (kind == ReduceKind::max) {
    acc = -std::numeric_limits<S>::infinity();
    for (std::size_t i = 0; i < av.size(); ++i)
      if (av[i] > acc) {
        acc = av[i];
        best_i = i;
      }
  } else {
    acc = S(0);
    for (S v : av) acc += v;
    if (kind == ReduceKind::mean) acc /= S(av.size());
  }
  const std::size_t n = av.size();
  return make_op<S>({1}, {acc}, {a},
                    [kind, n, best_i](const std::vector<S>& g,
                                      const std::vector<std::vector<S>*>& parents) {
                      auto& ga = *parents[0];
                      if (kind == ReduceKind::max) {
                        ga[best_i] += g[0];
                      } else {
                        const S go = kind == ReduceKind::mean ? g[0] / S(n) : g[0];
                        for (auto& v : ga) v += go;
                      }
                    });
}

}  // namespace detail

template <class S>
TensorT<S> sum(const TensorT<S>& a, std::size_t axis) {
  return detail::reduce_axis(a, axis, detail::ReduceKind::sum);
}
template <class S>
TensorT<S> sum_all(const TensorT<S>& a) {
  return detail::reduce_all(a, detail::ReduceKind::sum);
}
template <class S>
TensorT<S> mean(const TensorT<S>& a, std::size_t axis) {
  return detail::reduce_axis(a, axis, detail::ReduceKind::mean);
}
template <class S>
TensorT<S> mean_all(const TensorT<S>& a) {
  return detail::reduce_all(a, detail::ReduceKind::mean);
}
template <class S>
TensorT<S> max_reduce(const TensorT<S>& a, std::size_t axis) {
  return detail::reduce_axis(a, axis, detail::ReduceKind::max);
}
template <class S>
TensorT<S> max_all(const TensorT<S>& a) {
  return detail::reduce_all(a, detail::ReduceKind::max);
}

// Rows [begin, end) as a view-like copy; backward scatters into place.
template <class S>
TensorT<S> slice_rows(const TensorT<S>& a, std::size_t begin, std::size_t end) {
  const std::size_t m = a.rows(), n = a.cols();
  if (begin > end || end > m) {
    throw DimensionError("slice_rows: range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") out of " + std::to_string(m) + " rows");
  }
  const auto& av = a.values();
  std::vector<S> out(av.begin() + begin * n, av.begin() + end * n);
  return make_op<S>(
      {end - begin, n}, std::move(out), {a},
      [begin, n](const std::vector<S>& g, const std::vector<std::vector<S>*>& parents) {
        auto& ga = *parents[0];
        for (std::size_t i = 0; i < g.size(); ++i) ga[begin * n + i] += g[i];
      });
}

// Row-wise softmax probabilities (forward only, no graph). Stabilized by
// row-max subtraction.
template <class S>
std::vector<S> softmax_rows(const TensorT<S>& logits) {
  const std::size_t b = logits.rows(), c = logits.cols();
  const auto& lv = logits.values();
  std::vector<S> probs(b * c);
  for (std::size_t i = 0; i < b; ++i) {
    const S* row = lv.data() + i * c;
    S mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    S denom = S(0);
    for (std::size_t j = 0; j < c; ++j) {
      const S e = std::exp(row[j] - mx);
      probs[i * c + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= denom;
  }
  return probs;
}

// Mean over the batch of -log softmax(logits)[label]. Gradient is
// (softmax - one_hot) / B.
template <class S>
TensorT<S> softmax_cross_entropy(const TensorT<S>& logits, const std::vector<std::int32_t>& labels) {
  const std::size_t b = logits.rows(), c = logits.cols();
  if (labels.size() != b) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(b) + " rows");
  }
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw IndexError("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) +
                       ")");
    }
  }
  if (b == 0) throw DomainError("softmax_cross_entropy on empty batch");

  const auto& lv = logits.values();
  std::vector<S> probs = softmax_rows(logits);
  S loss = S(0);
  for (std::size_t i = 0; i < b; ++i) {
    const S* row = lv.data() + i * c;
    S mx = row[0];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    S denom = S(0);
    for (std::size_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
    // -log p[label] computed in log space for accuracy
    loss += -(row[labels[i]] - mx - std::log(denom));
  }
  loss /= S(b);

  return make_op<S>(
      {1}, {loss}, {logits},
      [b, c, labels, probs = std::move(probs)](const std::vector<S>& g,
                                               const std::vector<std::vector<S>*>& parents) {
        auto& gl = *parents[0];
        const S scale = g[0] / S(b);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            S p = probs[i * c + j];
            if (j == static_cast<std::size_t>(labels[i])) p -= S(1);
            gl[i * c + j] += scale * p;
          }
        }
      });
}

template <class S>
std::vector<std::int32_t> argmax_rows(const TensorT<S>& t) {
  const std::size_t m = t.rows(), n = t.cols();
  const auto& v = t.values();
  std::vector<std::int32_t> out(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (v[i * n + j] > v[i * n + best]) best = j;
    out[i] = static_cast<std::int32_t>(best);
  }
  return out;
}

using Tensor = TensorT<float>;

}  // namespace fsmb
