#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "prim/autodiff/tape.hpp"

namespace prim::testing {

// Relative error with a floor on the denominator so near-zero gradients are
// compared absolutely.
inline double rel_err(double analytic, double numeric, double floor = 1e-3) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t checked = 0;
};

using LossBuilder =
    std::function<ad::Var<double>(ad::Tape<double>&, const std::vector<ad::Var<double>>&)>;

/// Compares reverse-mode gradients against central differences for every
/// entry of every input.
inline GradCheck check_gradients(const std::vector<ad::Shape>& shapes,
                                 std::vector<std::vector<double>> values, const LossBuilder& build,
                                 double h = 1e-5) {
  auto eval = [&](bool want_grad, std::vector<std::vector<double>>* grads) {
    ad::Tape<double> tape(want_grad);
    std::vector<ad::Var<double>> vars;
    for (std::size_t i = 0; i < shapes.size(); ++i) vars.push_back(tape.leaf(shapes[i], values[i]));
    auto loss = build(tape, vars);
    double out = loss.item();
    if (want_grad) {
      tape.backward(loss);
      grads->clear();
      for (auto& v : vars) {
        auto g = v.grad();
        if (g.empty())
          grads->emplace_back(v.size(), 0.0);
        else
          grads->emplace_back(g.begin(), g.end());
      }
    }
    return out;
  };
  std::vector<std::vector<double>> analytic;
  eval(true, &analytic);
  GradCheck res;
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values[i].size(); ++j) {
      const double x0 = values[i][j];
      values[i][j] = x0 + h;
      const double fp = eval(false, nullptr);
      values[i][j] = x0 - h;
      const double fm = eval(false, nullptr);
      values[i][j] = x0;
      const double numeric = (fp - fm) / (2 * h);
      res.max_rel = std::max(res.max_rel, rel_err(analytic[i][j], numeric));
      ++res.checked;
    }
  return res;
}

}  // namespace prim::testing
