#include "graphmem/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

double Metrics::primary(Task task) const {
  if (task == Task::regression) {
    if (!rmse) throw ContractError("metrics: rmse not computed");
    return *rmse;
  }
  if (!accuracy) throw ContractError("metrics: accuracy not computed");
  return *accuracy;
}

double accuracy_score(const std::vector<std::int64_t>& predicted,
                      const std::vector<std::int64_t>& labels) {
  if (predicted.size() != labels.size() || predicted.empty()) {
    throw ContractError("accuracy_score: size mismatch or empty input");
  }
  std::int64_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::optional<double> auc_roc_score(const std::vector<double>& scores,
                                    const std::vector<std::int64_t>& labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw ContractError("auc_roc_score: size mismatch or empty input");
  }
  std::int64_t pos = 0, neg = 0;
  for (std::int64_t l : labels) (l == 1 ? pos : neg) += 1;
  if (pos == 0 || neg == 0) return std::nullopt;
  double concordant = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] == 1) continue;
      if (scores[i] > scores[j]) {
        concordant += 1.0;
      } else if (scores[i] == scores[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / (static_cast<double>(pos) * static_cast<double>(neg));
}

double rmse_score(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw ContractError("rmse_score: size mismatch or empty input");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(predictions.size()));
}

std::optional<double> r2_score(const std::vector<double>& predictions,
                               const std::vector<double>& targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw ContractError("r2_score: size mismatch or empty input");
  }
  double mean = 0.0;
  for (double t : targets) mean += t;
  mean /= static_cast<double>(targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_res += (targets[i] - predictions[i]) * (targets[i] - predictions[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

Metrics metrics_from_outputs(const std::vector<Tensor>& outputs, const std::vector<double>& targets,
                             Task task) {
  if (outputs.size() != targets.size() || outputs.empty()) {
    throw ContractError("metrics_from_outputs: size mismatch or empty input");
  }
  Metrics m;
  if (task == Task::regression) {
    std::vector<double> preds;
    preds.reserve(outputs.size());
    for (const Tensor& o : outputs) preds.push_back(o.at(0));
    m.rmse = rmse_score(preds, targets);
    m.r2 = r2_score(preds, targets);
    return m;
  }

  std::vector<std::int64_t> labels, argmax;
  std::vector<double> pos_scores;
  labels.reserve(targets.size());
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    labels.push_back(static_cast<std::int64_t>(targets[i]));
    const Tensor& logits = outputs[i];
    std::int64_t best = 0;
    for (std::int64_t j = 1; j < logits.numel(); ++j) {
      if (logits.at(j) > logits.at(best)) best = j;
    }
    argmax.push_back(best);
    if (task == Task::binary && logits.numel() == 2) {
      pos_scores.push_back(logits.at(1) - logits.at(0));
    }
  }
  m.accuracy = accuracy_score(argmax, labels);
  if (task == Task::binary && pos_scores.size() == labels.size()) {
    m.auc_roc = auc_roc_score(pos_scores, labels);
  }
  return m;
}

}  // namespace graphmem
