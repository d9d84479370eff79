#pragma once

#include <optional>
#include <vector>

#include "graphmem/graph.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

// Task-dependent evaluation results; a metric stays unset when it is
// undefined for the data (single-class AUC, zero-variance R^2).
struct Metrics {
  std::optional<double> accuracy;
  std::optional<double> auc_roc;
  std::optional<double> rmse;
  std::optional<double> r2;

  // The metric used for model selection and CV aggregation.
  double primary(Task task) const;
};

double accuracy_score(const std::vector<std::int64_t>& predicted,
                      const std::vector<std::int64_t>& labels);

// Pairwise concordance with ties counted 1/2; nullopt when only one class
// is present.
std::optional<double> auc_roc_score(const std::vector<double>& scores,
                                    const std::vector<std::int64_t>& labels);

double rmse_score(const std::vector<double>& predictions, const std::vector<double>& targets);

std::optional<double> r2_score(const std::vector<double>& predictions,
                               const std::vector<double>& targets);

// Metrics from raw per-graph model outputs (logits rows for classification,
// scalars for regression).
Metrics metrics_from_outputs(const std::vector<Tensor>& outputs, const std::vector<double>& targets,
                             Task task);

}  // namespace graphmem
