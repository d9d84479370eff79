#pragma once

#include <functional>
#include <string>
#include <vector>

#include "graphmem/tape.hpp"
#include "graphmem/tensor.hpp"

namespace graphmem {

// Compares the tape gradient of a scalar-valued function against central
// finite differences. Returns the maximum over entries of
// |analytic - numeric| / max(1, |analytic|, |numeric|).
// Throws ContractError if f returns a non-scalar or eps is out of (0, 1e-3].
double grad_check(const std::function<Var(Tape&, const Var&)>& f, const Tensor& x, double eps);

// Multi-input variant: checks every entry of every input tensor.
double grad_check_params(const std::function<Var(Tape&, const std::vector<Var>&)>& f,
                         const std::vector<Tensor>& xs, double eps);

struct GradCheckLine {
  std::string name;
  double max_rel_err;
  bool ok;
};

}  // namespace graphmem
