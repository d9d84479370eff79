#pragma once

#include <vector>

#include "graphmem/graph.hpp"
#include "graphmem/tape.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

// Auxiliary target distribution over clusters:
// P_ij = (C_ij^2 / f_j) / sum_j' (C_ij'^2 / f_j'), with f_j the column sums
// of C (floored at 1e-12). Sharpened, cluster-frequency-normalized copy of C;
// treated as a constant target in gradients.
Tensor target_distribution(const Tensor& c);

// KL(P || C) summed over all entries, with C floored at 1e-12 inside the log.
double clustering_loss(const Tensor& c, const Tensor& p);

// Batch supervised loss on the tape. Classification: mean softmax
// cross-entropy of the stacked logits; regression: RMSE over the batch.
// `targets` holds class ids or regression targets, one per logits row.
Var supervised_loss(const std::vector<Var>& per_graph_logits, const Tensor& targets, Task task);

// Value-level convenience used by tests.
double supervised_loss_value(const Tensor& logits, const Tensor& targets, Task task);

// Total loss: lambda * sup + (1 - lambda) * sum_l kl_l, inputs already
// averaged over the batch.
double total_loss(double sup, const std::vector<double>& kl_per_layer, double lambda);
Var total_loss(const Var& sup, const std::vector<Var>& kl_per_layer, double lambda);

}  // namespace graphmem
