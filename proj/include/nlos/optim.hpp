#pragma once

// Derivative-free Nelder-Mead simplex minimizer.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace nlos {

struct SimplexOptions {
  int max_evals = 4000;
  double f_tol = 1e-12;   ///< stop when the simplex spread in f falls below this
  double x_tol = 1e-10;   ///< ... and its diameter below this
  double initial_step = 0.1;
};

struct SimplexResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< best value after each iteration
};

/// Minimizes f from x0 with the standard reflect/expand/contract/shrink
/// coefficients (1, 2, 0.5, 0.5). `steps` sets the initial simplex edge per
/// coordinate; it defaults to options.initial_step.
inline SimplexResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x0, const SimplexOptions& options = {},
                                 const Eigen::VectorXd& steps = {}) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> simplex(static_cast<std::size_t>(n) + 1, x0);
  std::vector<double> values(simplex.size());
  SimplexResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    const double v = f(x);
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = steps.size() == n ? steps(i) : options.initial_step;
    simplex[static_cast<std::size_t>(i) + 1](i) += h;
  }
  for (std::size_t i = 0; i < simplex.size(); ++i) values[i] = eval(simplex[i]);

  std::vector<std::size_t> order(simplex.size());
  while (res.evaluations < options.max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    const std::size_t best = order.front();
    const std::size_t worst = order.back();
    const std::size_t second = order[order.size() - 2];
    res.trace.push_back(values[best]);

    double diameter = 0.0;
    for (const auto& x : simplex) diameter = std::max(diameter, (x - simplex[best]).lpNorm<Eigen::Infinity>());
    if (std::abs(values[worst] - values[best]) <= options.f_tol && diameter <= options.x_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i != worst) centroid += simplex[i];
    }
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - simplex[worst]);
    const double fr = eval(reflected);
    if (fr < values[best]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[worst]);
      const double fe = eval(expanded);
      if (fe < fr) {
        simplex[worst] = expanded;
        values[worst] = fe;
      } else {
        simplex[worst] = reflected;
        values[worst] = fr;
      }
      continue;
    }
    if (fr < values[second]) {
      simplex[worst] = reflected;
      values[worst] = fr;
      continue;
    }
    const bool outside = fr < values[worst];
    const Eigen::VectorXd contracted = outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                                               : Eigen::VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
    const double fc = eval(contracted);
    if (fc < std::min(fr, values[worst])) {
      simplex[worst] = contracted;
      values[worst] = fc;
      continue;
    }
    for (std::size_t i = 0; i < simplex.size(); ++i) {
      if (i == best) continue;
      simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
      values[i] = eval(simplex[i]);
    }
  }
  const auto it = std::min_element(values.begin(), values.end());
  res.x = simplex[static_cast<std::size_t>(it - values.begin())];
  res.value = *it;
  return res;
}

}  // namespace nlos
