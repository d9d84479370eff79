#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "graphmem/rng.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

class Tape;

// Handle to a tensor recorded on a tape.
class Var {
 public:
  Var() = default;
  const Tensor& value() const;
  Tape* tape() const { return tape_; }
  int slot() const { return slot_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int slot) : tape_(tape), slot_(slot) {}
  Tape* tape_ = nullptr;
  int slot_ = -1;
};

// Define-by-run reverse-mode tape. A tape records every operation performed
// on its vars in construction order; backward() visits the records exactly
// once in reverse and accumulates gradients shaped like their tensors.
// A tape is rebuilt per forward pass and is confined to one thread.
class Tape {
 public:
  // Pulls the gradient contribution for one input given the output gradient.
  using PullFn = std::function<Tensor(const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that never receives a gradient (inputs, masks, targets).
  Var constant(Tensor value);
  // Leaf whose gradient is retrievable after backward (trainable tensors).
  Var param(Tensor value);

  // Records an op node. Parents without requires-grad are skipped during
  // backward, so pull functions for constant inputs are never invoked.
  Var make(Tensor value, std::vector<std::pair<Var, PullFn>> parents);

  // Backpropagates from a scalar (1-element) output.
  void backward(const Var& out);

  // Gradient accumulated for `v` by the last backward(); zeros if none.
  Tensor grad(const Var& v) const;

  const Tensor& value(const Var& v) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Parent {
    int slot;
    PullFn pull;
  };
  struct Node {
    Tensor value;
    std::vector<Parent> parents;
    bool requires_grad = false;
  };

  int push(Tensor value, std::vector<Parent> parents, bool requires_grad);

  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::vector<char> has_grad_;
};

// ---------------------------------------------------------------------------
// Differentiable operations. All functions require their operands to live on
// the same tape and throw ShapeError/ContractError on invalid input.
// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var scale(const Var& a, double c);
Var add_const(const Var& a, double c);
Var leaky_relu(const Var& x, double slope);
Var row_softmax(const Var& x);
// Divides each row by its sum (sums must be nonzero).
Var row_normalize(const Var& x);
Var pairwise_sq_dist(const Var& q, const Var& k);
// Elementwise (1 + d/tau)^(-(tau+1)/2).
Var student_t_kernel(const Var& d, double tau);
Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const std::vector<Var>& parts);
Var take_rows(const Var& x, std::vector<std::int64_t> idx);
Var tile_rows(const Var& row, std::int64_t n);
// Multiplies row r of x by s[r]; s has shape {m, 1}.
Var scale_rows(const Var& x, const Var& s);
// Sums rows of x into their segment; seg[r] in [0, num_segments).
Var segment_sum(const Var& x, std::vector<std::int64_t> seg, std::int64_t num_segments);
// Softmax of the {m, 1} column x within each segment.
Var segment_softmax(const Var& x, std::vector<std::int64_t> seg);
// Slice {h, n, d} -> {n, d} along the leading axis.
Var slice_head(const Var& t, std::int64_t head);
Var select_entry(const Var& v, std::int64_t i);  // {n} -> {1}
Var scale_by(const Var& x, const Var& s);        // s: {1}
Var add_scalar(const Var& x, const Var& s);      // s: {1}
Var sum_all(const Var& x);                       // -> {1}
Var sqrt_scalar(const Var& x);                   // {1} -> {1}
Var sum_squares(const Var& x);                   // -> {1}
// Mean over rows of softmax cross-entropy; labels[i] in [0, cols).
Var softmax_cross_entropy(const Var& logits, std::vector<std::int64_t> labels);
// Sum_ij p_ij * (log p_ij - log max(c_ij, 1e-12)) with p held constant.
Var kl_divergence(const Tensor& p, const Var& c);
// Inverted dropout; identity when rate == 0.
Var dropout(const Var& x, double rate, Rng& rng);

}  // namespace graphmem
