#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "aghint/common.hpp"
#include "aghint/kernels.hpp"
#include "aghint/ndiff.hpp"

namespace aghint::nd {

namespace kn = kernels::active;

template <class T>
Tensor<T>::Tensor(std::size_t r, std::size_t c, std::vector<T> values) : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) {
    throw UsageError(fmt::format("tensor data has {} values, shape {}x{} needs {}", data.size(), r, c, r * c));
  }
}

namespace {

[[noreturn]] void shape_error(const char* op, std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2) {
  throw UsageError(fmt::format("{}: incompatible shapes {}x{} and {}x{}", op, r1, c1, r2, c2));
}

template <class T>
T sigmoid_value(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// log(1 + exp(x)) without overflow.
template <class T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

template <class T>
Var Tape<T>::push(Tensor<T> value, bool requires_grad) {
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::param(const Tensor<T>& value) {
  Node n;
  n.ref = &value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::input(const Tensor<T>& value) {
  Node n;
  n.ref = &value;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Var Tape<T>::constant(Tensor<T> value) {
  return push(std::move(value), false);
}

template <class T>
const Tensor<T>& Tape<T>::value(Var v) const {
  return val(v.id);
}

template <class T>
Tensor<T> Tape<T>::grad(Var v) const {
  const auto& n = nodes_[v.id];
  if (n.grad.size() == val(v.id).size() && n.grad.rows == val(v.id).rows) return n.grad;
  return Tensor<T>(val(v.id).rows, val(v.id).cols);
}

template <class T>
Tensor<T>& Tape<T>::grad_of(int id) {
  auto& n = nodes_[id];
  if (n.grad.rows != val(id).rows || n.grad.cols != val(id).cols) n.grad = Tensor<T>(val(id).rows, val(id).cols);
  return n.grad;
}

template <class T>
void Tape<T>::backward(Var loss) {
  const auto& l = val(loss.id);
  if (l.rows != 1 || l.cols != 1) throw UsageError("backward: loss must be a 1x1 tensor");
  for (auto& n : nodes_) n.grad = Tensor<T>();
  if (!needs(loss.id)) return;
  grad_of(loss.id).data[0] = T(1);
  for (int id = loss.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.backward && n.grad.size() > 0) n.backward();
  }
}

template <class T>
Var Tape<T>::matmul(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.cols != B.rows) shape_error("matmul", A.rows, A.cols, B.rows, B.cols);
  const std::size_t m = A.rows, k = A.cols, n = B.cols;
  Tensor<T> C(m, n);
  kn::matmul_acc(std::span<const T>(A.data), std::span<const T>(B.data), std::span<T>(C.data), m, k, n);
  const Var out = push(std::move(C), needs(a.id) || needs(b.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, b, out, m, k, n] {
      const auto& G = nodes_[out.id].grad;
      if (needs(a.id)) {
        kn::matmul_a_bt_acc(std::span<const T>(G.data), std::span<const T>(val(b.id).data),
                            std::span<T>(grad_of(a.id).data), m, k, n);
      }
      if (needs(b.id)) {
        kn::matmul_at_b_acc(std::span<const T>(val(a.id).data), std::span<const T>(G.data),
                            std::span<T>(grad_of(b.id).data), m, k, n);
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (!A.same_shape(B)) shape_error("add", A.rows, A.cols, B.rows, B.cols);
  Tensor<T> C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] += B.data[i];
  const Var out = push(std::move(C), needs(a.id) || needs(b.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, b, out] {
      const auto& G = nodes_[out.id].grad;
      for (Var v : {a, b}) {
        if (!needs(v.id)) continue;
        auto& g = grad_of(v.id);
        for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i];
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::add_row(Var a, Var bias) {
  const auto& A = val(a.id);
  const auto& b = val(bias.id);
  if (b.rows != 1 || b.cols != A.cols) shape_error("add_row", A.rows, A.cols, b.rows, b.cols);
  Tensor<T> C = A;
  for (std::size_t r = 0; r < C.rows; ++r) {
    for (std::size_t c = 0; c < C.cols; ++c) C(r, c) += b.data[c];
  }
  const Var out = push(std::move(C), needs(a.id) || needs(bias.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, bias, out] {
      const auto& G = nodes_[out.id].grad;
      if (needs(a.id)) {
        auto& g = grad_of(a.id);
        for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i];
      }
      if (needs(bias.id)) {
        auto& g = grad_of(bias.id);
        for (std::size_t r = 0; r < G.rows; ++r) {
          for (std::size_t c = 0; c < G.cols; ++c) g.data[c] += G(r, c);
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::mul(Var a, Var b) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (!A.same_shape(B)) shape_error("mul", A.rows, A.cols, B.rows, B.cols);
  Tensor<T> C = A;
  for (std::size_t i = 0; i < C.size(); ++i) C.data[i] *= B.data[i];
  const Var out = push(std::move(C), needs(a.id) || needs(b.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, b, out] {
      const auto& G = nodes_[out.id].grad;
      if (needs(a.id)) {
        auto& g = grad_of(a.id);
        const auto& B = val(b.id);
        for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i] * B.data[i];
      }
      if (needs(b.id)) {
        auto& g = grad_of(b.id);
        const auto& A = val(a.id);
        for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i] * A.data[i];
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::mul_col(Var a, Var w) {
  const auto& A = val(a.id);
  const auto& W = val(w.id);
  if (W.cols != 1 || W.rows != A.rows) shape_error("mul_col", A.rows, A.cols, W.rows, W.cols);
  Tensor<T> C = A;
  for (std::size_t r = 0; r < C.rows; ++r) {
    for (std::size_t c = 0; c < C.cols; ++c) C(r, c) *= W.data[r];
  }
  const Var out = push(std::move(C), needs(a.id) || needs(w.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, w, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& A = val(a.id);
      const auto& W = val(w.id);
      if (needs(a.id)) {
        auto& g = grad_of(a.id);
        for (std::size_t r = 0; r < G.rows; ++r) {
          for (std::size_t c = 0; c < G.cols; ++c) g(r, c) += G(r, c) * W.data[r];
        }
      }
      if (needs(w.id)) {
        auto& g = grad_of(w.id);
        for (std::size_t r = 0; r < G.rows; ++r) {
          T acc = 0;
          for (std::size_t c = 0; c < G.cols; ++c) acc += G(r, c) * A(r, c);
          g.data[r] += acc;
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::scale(Var a, T s) {
  Tensor<T> C = val(a.id);
  for (auto& x : C.data) x *= s;
  const Var out = push(std::move(C), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out, s] {
      const auto& G = nodes_[out.id].grad;
      auto& g = grad_of(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i] * s;
    };
  }
  return out;
}

template <class T>
Var Tape<T>::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_cols: no inputs");
  const std::size_t rows = val(parts[0].id).rows;
  std::size_t cols = 0;
  bool any = false;
  for (Var p : parts) {
    const auto& P = val(p.id);
    if (P.rows != rows) shape_error("concat_cols", rows, cols, P.rows, P.cols);
    cols += P.cols;
    any = any || needs(p.id);
  }
  Tensor<T> C(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const auto& P = val(p.id);
    for (std::size_t r = 0; r < rows; ++r) std::copy(P.row(r).begin(), P.row(r).end(), C.row(r).begin() + off);
    off += P.cols;
  }
  const Var out = push(std::move(C), any);
  if (any) {
    nodes_[out.id].backward = [this, parts, out] {
      const auto& G = nodes_[out.id].grad;
      std::size_t off = 0;
      for (Var p : parts) {
        const std::size_t pc = val(p.id).cols;
        if (needs(p.id)) {
          auto& g = grad_of(p.id);
          for (std::size_t r = 0; r < G.rows; ++r) {
            for (std::size_t c = 0; c < pc; ++c) g(r, c) += G(r, off + c);
          }
        }
        off += pc;
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw UsageError("concat_rows: no inputs");
  const std::size_t cols = val(parts[0].id).cols;
  std::size_t rows = 0;
  bool any = false;
  for (Var p : parts) {
    const auto& P = val(p.id);
    if (P.cols != cols) shape_error("concat_rows", rows, cols, P.rows, P.cols);
    rows += P.rows;
    any = any || needs(p.id);
  }
  Tensor<T> C(rows, cols);
  auto it = C.data.begin();
  for (Var p : parts) it = std::copy(val(p.id).data.begin(), val(p.id).data.end(), it);
  const Var out = push(std::move(C), any);
  if (any) {
    nodes_[out.id].backward = [this, parts, out] {
      const auto& G = nodes_[out.id].grad;
      std::size_t off = 0;
      for (Var p : parts) {
        const std::size_t n = val(p.id).size();
        if (needs(p.id)) {
          auto& g = grad_of(p.id);
          for (std::size_t i = 0; i < n; ++i) g.data[i] += G.data[off + i];
        }
        off += n;
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::slice_cols(Var a, std::size_t start, std::size_t count) {
  const auto& A = val(a.id);
  if (start + count > A.cols) throw UsageError(fmt::format("slice_cols: [{}, {}) outside {} columns", start, start + count, A.cols));
  Tensor<T> C(A.rows, count);
  for (std::size_t r = 0; r < A.rows; ++r) {
    std::copy_n(A.row(r).begin() + static_cast<std::ptrdiff_t>(start), count, C.row(r).begin());
  }
  const Var out = push(std::move(C), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out, start, count] {
      const auto& G = nodes_[out.id].grad;
      auto& g = grad_of(a.id);
      for (std::size_t r = 0; r < G.rows; ++r) {
        for (std::size_t c = 0; c < count; ++c) g(r, start + c) += G(r, c);
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::unary(Var a, const std::function<T(T)>& f, const std::function<T(T, T)>& df) {
  const auto& A = val(a.id);
  Tensor<T> C(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) C.data[i] = f(A.data[i]);
  const Var out = push(std::move(C), needs(a.id));
  if (needs(out.id)) {
    // df(x, y) is the derivative at input x with output y.
    nodes_[out.id].backward = [this, a, out, df] {
      const auto& G = nodes_[out.id].grad;
      const auto& X = val(a.id);
      const auto& Y = val(out.id);
      auto& g = grad_of(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i] * df(X.data[i], Y.data[i]);
    };
  }
  return out;
}

template <class T>
Var Tape<T>::leaky_relu(Var a, T slope) {
  return unary(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

template <class T>
Var Tape<T>::elu(Var a, T alpha) {
  return unary(
      a, [alpha](T x) { return x > T(0) ? x : alpha * std::expm1(x); },
      [alpha](T x, T y) { return x > T(0) ? T(1) : y + alpha; });
}

template <class T>
Var Tape<T>::sigmoid(Var a) {
  return unary(
      a, [](T x) { return sigmoid_value(x); }, [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Var Tape<T>::exp(Var a) {
  return unary(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <class T>
Var Tape<T>::log(Var a) {
  for (T x : val(a.id).data) {
    if (!(x > T(0))) throw NumericError(fmt::format("log of non-positive value {}", static_cast<double>(x)));
  }
  return unary(
      a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <class T>
Var Tape<T>::layer_norm(Var x, Var gain, Var bias, T eps) {
  const auto& X = val(x.id);
  const auto& g = val(gain.id);
  const auto& b = val(bias.id);
  if (!(eps > T(0))) throw UsageError("layer_norm: eps must be > 0");
  if (X.cols == 0) throw UsageError("layer_norm: zero-length rows");
  if (g.rows != 1 || g.cols != X.cols || b.rows != 1 || b.cols != X.cols) {
    shape_error("layer_norm", X.rows, X.cols, g.rows, g.cols);
  }
  const std::size_t n = X.cols;
  auto xhat = std::make_shared<Tensor<T>>(X.rows, n);
  auto inv_std = std::make_shared<std::vector<T>>(X.rows);
  Tensor<T> Y(X.rows, n);
  for (std::size_t r = 0; r < X.rows; ++r) {
    T mu = 0;
    for (T v : X.row(r)) mu += v;
    mu /= static_cast<T>(n);
    T var = 0;
    for (T v : X.row(r)) var += (v - mu) * (v - mu);
    var /= static_cast<T>(n);
    const T is = T(1) / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < n; ++c) {
      const T h = (X(r, c) - mu) * is;
      (*xhat)(r, c) = h;
      Y(r, c) = h * g.data[c] + b.data[c];
    }
  }
  const Var out = push(std::move(Y), needs(x.id) || needs(gain.id) || needs(bias.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, x, gain, bias, out, xhat, inv_std, n] {
      const auto& G = nodes_[out.id].grad;
      const auto& gv = val(gain.id);
      if (needs(gain.id) || needs(bias.id)) {
        for (std::size_t r = 0; r < G.rows; ++r) {
          for (std::size_t c = 0; c < n; ++c) {
            if (needs(gain.id)) grad_of(gain.id).data[c] += G(r, c) * (*xhat)(r, c);
            if (needs(bias.id)) grad_of(bias.id).data[c] += G(r, c);
          }
        }
      }
      if (needs(x.id)) {
        auto& gx = grad_of(x.id);
        for (std::size_t r = 0; r < G.rows; ++r) {
          T mean_d = 0;
          T mean_dx = 0;
          for (std::size_t c = 0; c < n; ++c) {
            const T d = G(r, c) * gv.data[c];
            mean_d += d;
            mean_dx += d * (*xhat)(r, c);
          }
          mean_d /= static_cast<T>(n);
          mean_dx /= static_cast<T>(n);
          for (std::size_t c = 0; c < n; ++c) {
            const T d = G(r, c) * gv.data[c];
            gx(r, c) += (*inv_std)[r] * (d - mean_d - (*xhat)(r, c) * mean_dx);
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::dropout(Var a, T rate, std::uint64_t key, bool training) {
  if (!(rate >= T(0) && rate < T(1))) throw UsageError(fmt::format("dropout rate {} outside [0, 1)", static_cast<double>(rate)));
  if (!training || rate == T(0)) return a;
  const auto& A = val(a.id);
  auto mask = std::make_shared<std::vector<T>>(A.size());
  const T keep_scale = T(1) / (T(1) - rate);
  Tensor<T> C(A.rows, A.cols);
  for (std::size_t i = 0; i < A.size(); ++i) {
    (*mask)[i] = counter_uniform(key, i) >= static_cast<double>(rate) ? keep_scale : T(0);
    C.data[i] = A.data[i] * (*mask)[i];
  }
  const Var out = push(std::move(C), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out, mask] {
      const auto& G = nodes_[out.id].grad;
      auto& g = grad_of(a.id);
      for (std::size_t i = 0; i < G.size(); ++i) g.data[i] += G.data[i] * (*mask)[i];
    };
  }
  return out;
}

template <class T>
Var Tape<T>::gather_rows(Var a, Index idx) {
  const auto& A = val(a.id);
  Tensor<T> C(idx->size(), A.cols);
  for (std::size_t i = 0; i < idx->size(); ++i) {
    const auto r = (*idx)[i];
    if (r < 0 || static_cast<std::size_t>(r) >= A.rows) {
      throw UsageError(fmt::format("gather_rows: index {} outside {} rows", r, A.rows));
    }
    std::copy(A.row(r).begin(), A.row(r).end(), C.row(i).begin());
  }
  const Var out = push(std::move(C), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out, idx] {
      const auto& G = nodes_[out.id].grad;
      auto& g = grad_of(a.id);
      for (std::size_t i = 0; i < idx->size(); ++i) {
        auto dst = g.row((*idx)[i]);
        const auto src = G.row(i);
        for (std::size_t c = 0; c < G.cols; ++c) dst[c] += src[c];
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::scatter_weighted_sum(Var x, Index src, Var weights, Offsets offsets) {
  const auto& X = val(x.id);
  const auto& W = val(weights.id);
  if (offsets->empty() || offsets->back() != src->size() || W.rows != src->size() || W.cols != 1) {
    throw UsageError(fmt::format("scatter_weighted_sum: {} sources, {} weights, last offset {}", src->size(), W.rows,
                                 offsets->empty() ? 0 : offsets->back()));
  }
  for (auto s : *src) {
    if (s < 0 || static_cast<std::size_t>(s) >= X.rows) throw UsageError(fmt::format("scatter_weighted_sum: source {} outside {} rows", s, X.rows));
  }
  const std::size_t segs = offsets->size() - 1;
  Tensor<T> C(segs, X.cols);
  kn::segment_weighted_sum_acc(std::span<const T>(X.data), X.cols, std::span<const std::int32_t>(*src),
                               std::span<const T>(W.data), std::span<const std::size_t>(*offsets),
                               std::span<T>(C.data));
  const Var out = push(std::move(C), needs(x.id) || needs(weights.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, x, src, weights, offsets, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& X = val(x.id);
      const auto& W = val(weights.id);
      const std::size_t cols = X.cols;
      if (needs(weights.id)) {
        auto& gw = grad_of(weights.id);
        for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
          const T* grow = G.data.data() + s * cols;
          for (std::size_t e = (*offsets)[s]; e < (*offsets)[s + 1]; ++e) {
            const T* xrow = X.data.data() + static_cast<std::size_t>((*src)[e]) * cols;
            T acc = 0;
            for (std::size_t c = 0; c < cols; ++c) acc += grow[c] * xrow[c];
            gw.data[e] += acc;
          }
        }
      }
      if (needs(x.id)) {
        auto& gx = grad_of(x.id);
        for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
          const T* grow = G.data.data() + s * cols;
          for (std::size_t e = (*offsets)[s]; e < (*offsets)[s + 1]; ++e) {
            T* xrow = gx.data.data() + static_cast<std::size_t>((*src)[e]) * cols;
            const T w = W.data[e];
            for (std::size_t c = 0; c < cols; ++c) xrow[c] += w * grow[c];
          }
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::segment_softmax(Var logits, Offsets offsets) {
  const auto& L = val(logits.id);
  if (L.cols != 1 && L.size() > 0) throw UsageError("segment_softmax: logits must be a column");
  if (offsets->empty() || offsets->front() != 0 || offsets->back() != L.rows) {
    throw UsageError(fmt::format("segment_softmax: offsets cover {} entries, logits have {}",
                                 offsets->empty() ? 0 : offsets->back(), L.rows));
  }
  for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
    if ((*offsets)[s] > (*offsets)[s + 1]) throw UsageError("segment_softmax: offsets must be nondecreasing");
  }
  for (T v : L.data) {
    if (!std::isfinite(v)) throw NumericError("segment_softmax: non-finite logit");
  }
  Tensor<T> Y(L.rows, 1);
  kn::segment_softmax(std::span<const T>(L.data), std::span<const std::size_t>(*offsets), std::span<T>(Y.data));
  const Var out = push(std::move(Y), needs(logits.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, logits, offsets, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& Y = val(out.id);
      auto& g = grad_of(logits.id);
      for (std::size_t s = 0; s + 1 < offsets->size(); ++s) {
        T dot = 0;
        for (std::size_t e = (*offsets)[s]; e < (*offsets)[s + 1]; ++e) dot += Y.data[e] * G.data[e];
        for (std::size_t e = (*offsets)[s]; e < (*offsets)[s + 1]; ++e) g.data[e] += Y.data[e] * (G.data[e] - dot);
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::softmax_rows(Var a) {
  const auto& A = val(a.id);
  Tensor<T> Y(A.rows, A.cols);
  for (std::size_t r = 0; r < A.rows; ++r) {
    if (A.cols == 0) break;
    const auto in = A.row(r);
    auto o = Y.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (std::size_t c = 0; c < A.cols; ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    for (auto& v : o) v /= sum;
  }
  const Var out = push(std::move(Y), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out] {
      const auto& G = nodes_[out.id].grad;
      const auto& Y = val(out.id);
      auto& g = grad_of(a.id);
      for (std::size_t r = 0; r < G.rows; ++r) {
        T dot = 0;
        for (std::size_t c = 0; c < G.cols; ++c) dot += Y(r, c) * G(r, c);
        for (std::size_t c = 0; c < G.cols; ++c) g(r, c) += Y(r, c) * (G(r, c) - dot);
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::indexed_row_dot(Var a, Index ia, Var b, Index ib) {
  const auto& A = val(a.id);
  const auto& B = val(b.id);
  if (A.cols != B.cols || ia->size() != ib->size()) shape_error("indexed_row_dot", A.rows, A.cols, B.rows, B.cols);
  for (auto i : *ia) {
    if (i < 0 || static_cast<std::size_t>(i) >= A.rows) throw UsageError("indexed_row_dot: left index out of range");
  }
  for (auto i : *ib) {
    if (i < 0 || static_cast<std::size_t>(i) >= B.rows) throw UsageError("indexed_row_dot: right index out of range");
  }
  const std::size_t n = A.cols;
  Tensor<T> C(ia->size(), 1);
  for (std::size_t e = 0; e < ia->size(); ++e) {
    const T* x = A.data.data() + static_cast<std::size_t>((*ia)[e]) * n;
    const T* y = B.data.data() + static_cast<std::size_t>((*ib)[e]) * n;
    T acc = 0;
    for (std::size_t c = 0; c < n; ++c) acc += x[c] * y[c];
    C.data[e] = acc;
  }
  const Var out = push(std::move(C), needs(a.id) || needs(b.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, ia, b, ib, out, n] {
      const auto& G = nodes_[out.id].grad;
      const auto& A = val(a.id);
      const auto& B = val(b.id);
      for (std::size_t e = 0; e < ia->size(); ++e) {
        const T ge = G.data[e];
        if (ge == T(0)) continue;
        const auto ra = static_cast<std::size_t>((*ia)[e]);
        const auto rb = static_cast<std::size_t>((*ib)[e]);
        if (needs(a.id)) {
          T* gx = grad_of(a.id).data.data() + ra * n;
          const T* y = B.data.data() + rb * n;
          for (std::size_t c = 0; c < n; ++c) gx[c] += ge * y[c];
        }
        if (needs(b.id)) {
          T* gy = grad_of(b.id).data.data() + rb * n;
          const T* x = A.data.data() + ra * n;
          for (std::size_t c = 0; c < n; ++c) gy[c] += ge * x[c];
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::sum(Var a) {
  T s = 0;
  for (T v : val(a.id).data) s += v;
  const Var out = push(Tensor<T>(1, 1, s), needs(a.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, a, out] {
      const T g0 = nodes_[out.id].grad.data[0];
      for (auto& v : grad_of(a.id).data) v += g0;
    };
  }
  return out;
}

template <class T>
Var Tape<T>::mean(Var a) {
  const auto n = val(a.id).size();
  if (n == 0) throw UsageError("mean of an empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(n));
}

template <class T>
Var Tape<T>::cross_entropy_with_logits(Var logits, Index targets) {
  const auto& L = val(logits.id);
  if (targets->size() != L.rows) throw UsageError("cross_entropy_with_logits: one target per row required");
  if (L.rows == 0) throw UsageError("cross_entropy_with_logits: no rows");
  auto probs = std::make_shared<Tensor<T>>(L.rows, L.cols);
  T total = 0;
  for (std::size_t r = 0; r < L.rows; ++r) {
    const auto t = (*targets)[r];
    if (t < 0 || static_cast<std::size_t>(t) >= L.cols) throw UsageError(fmt::format("cross_entropy_with_logits: class {} out of range", t));
    const auto in = L.row(r);
    const T mx = *std::max_element(in.begin(), in.end());
    T sum = 0;
    for (std::size_t c = 0; c < L.cols; ++c) sum += std::exp(in[c] - mx);
    const T lse = mx + std::log(sum);
    total += lse - in[t];
    for (std::size_t c = 0; c < L.cols; ++c) (*probs)(r, c) = std::exp(in[c] - lse);
  }
  const T inv = T(1) / static_cast<T>(L.rows);
  const Var out = push(Tensor<T>(1, 1, total * inv), needs(logits.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, logits, targets, out, probs, inv] {
      const T g0 = nodes_[out.id].grad.data[0] * inv;
      auto& g = grad_of(logits.id);
      for (std::size_t r = 0; r < g.rows; ++r) {
        for (std::size_t c = 0; c < g.cols; ++c) {
          const T y = static_cast<std::size_t>((*targets)[r]) == c ? T(1) : T(0);
          g(r, c) += g0 * ((*probs)(r, c) - y);
        }
      }
    };
  }
  return out;
}

template <class T>
Var Tape<T>::bce_with_logits(Var logits, const Tensor<T>& targets) {
  const auto& L = val(logits.id);
  if (!L.same_shape(targets)) shape_error("bce_with_logits", L.rows, L.cols, targets.rows, targets.cols);
  if (L.size() == 0) throw UsageError("bce_with_logits: no entries");
  auto y = std::make_shared<std::vector<T>>(targets.data);
  T total = 0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    const T x = L.data[i];
    total += softplus(x) - (*y)[i] * x;
  }
  const T inv = T(1) / static_cast<T>(L.size());
  const Var out = push(Tensor<T>(1, 1, total * inv), needs(logits.id));
  if (needs(out.id)) {
    nodes_[out.id].backward = [this, logits, out, y, inv] {
      const T g0 = nodes_[out.id].grad.data[0] * inv;
      auto& g = grad_of(logits.id);
      const auto& L = val(logits.id);
      for (std::size_t i = 0; i < L.size(); ++i) g.data[i] += g0 * (sigmoid_value(L.data[i]) - (*y)[i]);
    };
  }
  return out;
}

template struct Tensor<float>;
template struct Tensor<double>;
template class Tape<float>;
template class Tape<double>;

GradCheckResult grad_check(const LossFn& f, std::vector<Tensor<double>*> params, double eps, double floor) {
  if (!(eps > 0.0)) throw UsageError("grad_check: eps must be > 0");
  GradCheckResult result;
  std::vector<Tensor<double>> analytic;
  {
    Tape<double> tape;
    std::vector<Var> handles;
    for (auto* p : params) handles.push_back(tape.param(*p));
    const Var loss = f(tape, handles);
    if (!std::isfinite(tape.value(loss).data.at(0))) throw NumericError("grad_check: non-finite loss");
    tape.backward(loss);
    for (Var h : handles) analytic.push_back(tape.grad(h));
  }
  auto evaluate = [&] {
    Tape<double> tape;
    std::vector<Var> handles;
    for (auto* p : params) handles.push_back(tape.param(*p));
    const double v = tape.value(f(tape, handles)).data.at(0);
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite loss");
    return v;
  };
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& data = params[p]->data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double up = evaluate();
      data[i] = saved - eps;
      const double down = evaluate();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p].data[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      if (result.entries++ == 0 || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = p;
        result.worst_entry = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace aghint::nd
