#pragma once

// Central finite-difference oracle for gradient checks. Runs the tensor code
// paths in double precision and compares backward() output against
// (f(x+h) - f(x-h)) / 2h element by element. Test-only; never used by the
// implementation it checks.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "fsmb/tensor.hpp"

namespace fsmb::test {

using DTensor = fsmb::TensorT<double>;

struct GradCheckResult {
  bool ok = true;
  double worst_rel = 0.0;
  std::string detail;
};

// f maps the leaf tensors to a scalar loss. Leaves must have
// requires_grad set. step/tol follow the harness defaults (1e-4 / 1e-4).
inline GradCheckResult gradcheck(const std::function<DTensor(std::vector<DTensor>&)>& f,
                                 std::vector<DTensor> leaves, double step = 1e-4,
                                 double tol = 1e-4) {
  GradCheckResult res;
  for (auto& leaf : leaves) leaf.zero_grad();
  DTensor loss = f(leaves);
  loss.backward();

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    auto& leaf = leaves[li];
    if (!leaf.requires_grad()) continue;
    const std::vector<double> analytic = leaf.grad();
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      const double orig = leaf.values()[i];
      leaf.mutable_values()[i] = orig + step;
      const double fplus = f(leaves).item();
      leaf.mutable_values()[i] = orig - step;
      const double fminus = f(leaves).item();
      leaf.mutable_values()[i] = orig;
      const double numeric = (fplus - fminus) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double denom = std::max({1.0, std::fabs(a), std::fabs(numeric)});
      const double rel = std::fabs(a - numeric) / denom;
      res.worst_rel = std::max(res.worst_rel, rel);
      if (rel >= tol) {
        res.ok = false;
        res.detail = "leaf " + std::to_string(li) + " elem " + std::to_string(i) + ": analytic " +
                     std::to_string(a) + " vs numeric " + std::to_string(numeric);
        return res;
      }
    }
  }
  return res;
}

}  // namespace fsmb::test
