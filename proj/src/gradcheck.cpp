#include "graphmem/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "graphmem/error.hpp"

namespace graphmem {

namespace {

double eval_scalar(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                   const std::vector<Tensor>& xs) {
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(xs.size());
  for (const Tensor& x : xs) vars.push_back(tape.param(x));
  Var out = f(tape, vars);
  if (out.value().numel() != 1) {
    throw ContractError("grad_check: function output must be a scalar, got " +
                        out.value().shape_str());
  }
  return out.value().at(0);
}

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

}  // namespace

double grad_check_params(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                         const std::vector<Tensor>& xs, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) {
    throw ContractError("grad_check: eps must lie in (0, 1e-3]");
  }

  // Analytic gradients from one taped evaluation.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(xs.size());
  for (const Tensor& x : xs) vars.push_back(tape.param(x));
  Var out = f(tape, vars);
  if (out.value().numel() != 1) {
    throw ContractError("grad_check: function output must be a scalar, got " +
                        out.value().shape_str());
  }
  tape.backward(out);
  std::vector<Tensor> grads;
  grads.reserve(vars.size());
  for (const Var& v : vars) grads.push_back(tape.grad(v));

  // Central finite differences, one entry at a time.
  double worst = 0.0;
  std::vector<Tensor> probe = xs;
  for (std::size_t t = 0; t < probe.size(); ++t) {
    for (std::int64_t i = 0; i < probe[t].numel(); ++i) {
      const double saved = probe[t].at(i);
      probe[t].at(i) = saved + eps;
      const double fp = eval_scalar(f, probe);
      probe[t].at(i) = saved - eps;
      const double fm = eval_scalar(f, probe);
      probe[t].at(i) = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      worst = std::max(worst, rel_err(grads[t].at(i), numeric));
    }
  }
  return worst;
}

double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x, double eps) {
  return grad_check_params(
      [&f](Tape& tape, const std::vector<Var>& vars) { return f(tape, vars[0]); }, {x}, eps);
}

}  // namespace graphmem
