#include "graphmem/losses.hpp"

#include <algorithm>
#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {
constexpr double kFloor = 1e-12;
}

Tensor target_distribution(const Tensor& c) {
  const std::int64_t n = c.rows(), m = c.cols();
  std::vector<double> freq(static_cast<std::size_t>(m), 0.0);
  for (std::int64_t j = 0; j < m; ++j) {
    double f = 0.0;
    for (std::int64_t i = 0; i < n; ++i) f += c.at(i, j);
    freq[static_cast<std::size_t>(j)] = std::max(f, kFloor);
  }
  Tensor p({n, m});
  for (std::int64_t i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (std::int64_t j = 0; j < m; ++j) {
      const double v = c.at(i, j) * c.at(i, j) / freq[static_cast<std::size_t>(j)];
      p.at(i, j) = v;
      row_sum += v;
    }
    if (row_sum <= 0.0) throw NumericError("target_distribution: zero row");
    for (std::int64_t j = 0; j < m; ++j) p.at(i, j) /= row_sum;
  }
  return p;
}

double clustering_loss(const Tensor& c, const Tensor& p) {
  check_same_shape(c, p, "clustering_loss");
  double loss = 0.0;
  for (std::int64_t i = 0; i < p.numel(); ++i) {
    const double pi = p.at(i);
    if (pi <= 0.0) continue;
    loss += pi * (std::log(pi) - std::log(std::max(c.at(i), kFloor)));
  }
  return loss;
}

Var supervised_loss(const std::vector<Var>& per_graph_logits, const Tensor& targets, Task task) {
  if (per_graph_logits.empty()) throw ContractError("supervised_loss: empty batch");
  if (targets.numel() != static_cast<std::int64_t>(per_graph_logits.size())) {
    throw ShapeError("supervised_loss: one target per logits row required");
  }
  Var stacked = per_graph_logits.size() == 1 ? per_graph_logits[0]
                                             : concat_rows(per_graph_logits);
  const std::int64_t b = stacked.value().rows();
  if (task == Task::regression) {
    if (stacked.value().cols() != 1) {
      throw ShapeError("supervised_loss: regression outputs must be scalars");
    }
    Tensor t({b, 1});
    for (std::int64_t i = 0; i < b; ++i) t.at(i, 0) = targets.at(i);
    Var diff = sub(stacked, stacked.tape()->constant(std::move(t)));
    return sqrt_scalar(scale(sum_squares(diff), 1.0 / static_cast<double>(b)));
  }
  std::vector<std::int64_t> labels;
  labels.reserve(static_cast<std::size_t>(b));
  for (std::int64_t i = 0; i < b; ++i) {
    const double t = targets.at(i);
    if (t != std::floor(t)) throw ContractError("supervised_loss: non-integer class label");
    labels.push_back(static_cast<std::int64_t>(t));
  }
  return softmax_cross_entropy(stacked, std::move(labels));
}

double supervised_loss_value(const Tensor& logits, const Tensor& targets, Task task) {
  Tape tape;
  std::vector<Var> rows;
  for (std::int64_t i = 0; i < logits.rows(); ++i) {
    Tensor row({1, logits.cols()});
    for (std::int64_t j = 0; j < logits.cols(); ++j) row.at(0, j) = logits.at(i, j);
    rows.push_back(tape.constant(std::move(row)));
  }
  return supervised_loss(rows, targets, task).value().at(0);
}

double total_loss(double sup, const std::vector<double>& kl_per_layer, double lambda) {
  double kl = 0.0;
  for (double v : kl_per_layer) kl += v;
  return lambda * sup + (1.0 - lambda) * kl;
}

Var total_loss(const Var& sup, const std::vector<Var>& kl_per_layer, double lambda) {
  Var out = scale(sup, lambda);
  if (lambda != 1.0) {
    for (const Var& kl : kl_per_layer) out = add(out, scale(kl, 1.0 - lambda));
  }
  return out;
}

}  // namespace graphmem
