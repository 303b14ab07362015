#pragma once

#include <cstddef>
#include <vector>

#include "otmask/matrix.hpp"

namespace otmask {

/// Balanced transport problem: cost is m x n, supply has m entries, demand n.
struct TransportProblem {
  DenseMatrix cost;
  std::vector<double> supply;
  std::vector<double> demand;

  std::size_t suppliers() const { return supply.size(); }
  std::size_t consumers() const { return demand.size(); }

  /// Shapes agree, entries finite and nonnegative, and the totals balance within
  /// 1e-9 relative.
  void validate() const;
};

struct SinkhornConfig {
  double lambda = 0.1;
  int iterations = 80;
  bool log_domain = false;
  /// Divide costs by their maximum before building the Gibbs kernel.
  bool normalize_cost = true;

  void validate() const;
};

struct TransportPlan {
  DenseMatrix gamma;
  /// Largest absolute deviation of a row sum from supply or a column sum from demand.
  double marginal_error = 0.0;
};

/// Entropic OT by alternating scaling. Each of the `iterations` rounds updates the
/// consumer scaling u_j = y_j / sum_i K_ij v_i, then the supplier scaling
/// v_i = x_i / sum_j K_ij u_j, with K = exp(-c / lambda). The plan is
/// gamma_ij = v_i K_ij u_j, so rows target supply and columns target demand.
///
/// The plain path throws NumericalError when the kernel underflows; the log-domain
/// path does the same updates with log-sum-exp and does not.
TransportPlan sinkhorn_solve(const TransportProblem& problem, const SinkhornConfig& config = {});

inline constexpr std::size_t kExactSolveMaxCells = 10'000;

/// Exact minimum-cost plan by the transportation simplex method. Restricted to
/// m * n <= kExactSolveMaxCells.
TransportPlan exact_solve(const TransportProblem& problem);

/// sum_ij gamma_ij * cost_ij.
double plan_cost(const TransportProblem& problem, const TransportPlan& plan);

double marginal_deviation(const TransportProblem& problem, const DenseMatrix& gamma);

}  // namespace otmask
