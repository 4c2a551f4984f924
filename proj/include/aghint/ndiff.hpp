#pragma once

// Dense reverse-mode differentiation over row-major matrices, sized for the
// layers the model needs. Graph structure enters only through index arrays
// (gather / scatter / segment ops), never through sparse tensors.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aghint::nd {

template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<T> values);

  std::size_t size() const { return data.size(); }
  T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<T> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const T> row(std::size_t r) const { return {data.data() + r * cols, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor&) const = default;
};

using Index = std::shared_ptr<const std::vector<std::int32_t>>;
using Offsets = std::shared_ptr<const std::vector<std::size_t>>;

inline Index make_index(std::vector<std::int32_t> v) {
  return std::make_shared<const std::vector<std::int32_t>>(std::move(v));
}
inline Offsets make_offsets(std::vector<std::size_t> v) {
  return std::make_shared<const std::vector<std::size_t>>(std::move(v));
}

// Handle to a value recorded on a tape.
struct Var {
  int id = -1;
};

// Records operations in execution order; backward() replays them in reverse.
// Parameters are referenced, not copied, and must outlive the tape.
template <class T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(const Tensor<T>& value);  // gradient tracked
  Var input(const Tensor<T>& value);  // referenced, no gradient
  Var constant(Tensor<T> value);      // owned, no gradient

  const Tensor<T>& value(Var v) const;
  // Gradient of the last backward() target; zeros when v did not contribute.
  Tensor<T> grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // `loss` must be 1 x 1.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var add_row(Var a, Var bias);  // bias is 1 x cols, broadcast over rows
  Var mul(Var a, Var b);
  Var mul_col(Var a, Var w);     // w is rows x 1, broadcast over columns
  Var scale(Var a, T s);
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_cols(Var a, std::size_t start, std::size_t count);
  Var leaky_relu(Var a, T slope);
  Var elu(Var a, T alpha = T(1));
  Var sigmoid(Var a);
  Var exp(Var a);
  Var log(Var a);
  Var layer_norm(Var x, Var gain, Var bias, T eps);
  // Inverted dropout; identity when !training or rate == 0. The mask is a
  // pure function of (key, element index).
  Var dropout(Var a, T rate, std::uint64_t key, bool training);
  Var gather_rows(Var a, Index idx);
  // out[s] = sum over e in [offsets[s], offsets[s+1]) of weights[e] * x[src[e]].
  // weights is E x 1.
  Var scatter_weighted_sum(Var x, Index src, Var weights, Offsets offsets);
  // Softmax of an E x 1 column within each segment.
  Var segment_softmax(Var logits, Offsets offsets);
  Var softmax_rows(Var a);
  // out[e] = dot(a[ia[e]], b[ib[e]]), E x 1.
  Var indexed_row_dot(Var a, Index ia, Var b, Index ib);
  Var sum(Var a);
  Var mean(Var a);
  // Mean over rows of -log softmax(logits)[row, target[row]].
  Var cross_entropy_with_logits(Var logits, Index targets);
  // Mean over entries; targets is a 0/1 matrix of the same shape.
  Var bce_with_logits(Var logits, const Tensor<T>& targets);

 private:
  struct Node {
    const Tensor<T>* ref = nullptr;
    Tensor<T> own;
    Tensor<T> grad;
    bool requires_grad = false;
    std::function<void()> backward;
  };

  const Tensor<T>& val(int id) const { return nodes_[id].ref ? *nodes_[id].ref : nodes_[id].own; }
  Tensor<T>& grad_of(int id);
  bool needs(int id) const { return nodes_[id].requires_grad; }
  Var push(Tensor<T> value, bool requires_grad);
  Var unary(Var a, const std::function<T(T)>& f, const std::function<T(T, T)>& df);

  std::vector<Node> nodes_;
};

extern template struct Tensor<float>;
extern template struct Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

// Builds a scalar loss on a fresh tape from the given parameter handles.
using LossFn = std::function<Var(Tape<double>&, const std::vector<Var>&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_entry = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries = 0;
};

// Central differences against the tape gradient for every entry of every
// parameter. Relative error uses max(|a|, |n|, floor) as denominator.
GradCheckResult grad_check(const LossFn& f, std::vector<Tensor<double>*> params, double eps = 1e-5,
                           double floor = 1e-6);

}  // namespace aghint::nd
