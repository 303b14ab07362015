#include "otmask/ot_solver.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <sstream>

#include "otmask/errors.hpp"

namespace otmask {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_cost(const DenseMatrix& cost) {
  double hi = 0.0;
  for (double c : cost.data()) hi = std::max(hi, c);
  return hi;
}

double cost_scale(const TransportProblem& problem, const SinkhornConfig& config) {
  if (!config.normalize_cost) return 1.0;
  const double hi = max_cost(problem.cost);
  return hi > 0.0 ? hi : 1.0;
}

[[noreturn]] void underflow() {
  throw NumericalError(
      "Sinkhorn kernel underflowed to zero (lambda too small for plain scaling); "
      "rerun with log_domain=true");
}

TransportPlan sinkhorn_plain(const TransportProblem& problem, const SinkhornConfig& config) {
  const std::size_t m = problem.suppliers();
  const std::size_t n = problem.consumers();
  const double inv = 1.0 / (cost_scale(problem, config) * config.lambda);

  DenseMatrix kernel(m, n);
  for (std::size_t k = 0; k < kernel.size(); ++k) {
    kernel.data()[k] = std::exp(-problem.cost.data()[k] * inv);
    if (!std::isfinite(kernel.data()[k])) underflow();
  }

  std::vector<double> u(n, 1.0);
  std::vector<double> v(m, 1.0);
  std::vector<double> col(n);
  for (int t = 0; t < config.iterations; ++t) {
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const auto krow = kernel.row(i);
      for (std::size_t j = 0; j < n; ++j) col[j] += krow[j] * v[i];
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (problem.demand[j] == 0.0) {
        u[j] = 0.0;
        continue;
      }
      if (!(col[j] > 0.0)) underflow();
      u[j] = problem.demand[j] / col[j];
      if (!std::isfinite(u[j])) underflow();
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (problem.supply[i] == 0.0) {
        v[i] = 0.0;
        continue;
      }
      const auto krow = kernel.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += krow[j] * u[j];
      if (!(s > 0.0)) underflow();
      v[i] = problem.supply[i] / s;
      if (!std::isfinite(v[i])) underflow();
    }
  }

  TransportPlan plan{DenseMatrix(m, n), 0.0};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) plan.gamma(i, j) = v[i] * kernel(i, j) * u[j];
  }
  plan.marginal_error = marginal_deviation(problem, plan.gamma);
  return plan;
}

TransportPlan sinkhorn_log(const TransportProblem& problem, const SinkhornConfig& config) {
  const std::size_t m = problem.suppliers();
  const std::size_t n = problem.consumers();
  const double inv = 1.0 / (cost_scale(problem, config) * config.lambda);

  DenseMatrix log_kernel(m, n);
  for (std::size_t k = 0; k < log_kernel.size(); ++k) {
    log_kernel.data()[k] = -problem.cost.data()[k] * inv;
  }

  // f = log v (suppliers), g = log u (consumers).
  std::vector<double> f(m, 0.0);
  std::vector<double> g(n, 0.0);
  std::vector<double> col_max(n);
  std::vector<double> col_sum(n);
  for (int t = 0; t < config.iterations; ++t) {
    std::fill(col_max.begin(), col_max.end(), -kInf);
    for (std::size_t i = 0; i < m; ++i) {
      if (f[i] == -kInf) continue;
      const auto lrow = log_kernel.row(i);
      for (std::size_t j = 0; j < n; ++j) col_max[j] = std::max(col_max[j], lrow[j] + f[i]);
    }
    std::fill(col_sum.begin(), col_sum.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (f[i] == -kInf) continue;
      const auto lrow = log_kernel.row(i);
      for (std::size_t j = 0; j < n; ++j) col_sum[j] += std::exp(lrow[j] + f[i] - col_max[j]);
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (problem.demand[j] == 0.0) {
        g[j] = -kInf;
        continue;
      }
      if (col_max[j] == -kInf) {
        throw InvariantViolation("consumer with demand has no supplier mass");
      }
      g[j] = std::log(problem.demand[j]) - (col_max[j] + std::log(col_sum[j]));
    }
    for (std::size_t i = 0; i < m; ++i) {
      if (problem.supply[i] == 0.0) {
        f[i] = -kInf;
        continue;
      }
      const auto lrow = log_kernel.row(i);
      double hi = -kInf;
      for (std::size_t j = 0; j < n; ++j) {
        if (g[j] != -kInf) hi = std::max(hi, lrow[j] + g[j]);
      }
      if (hi == -kInf) throw InvariantViolation("supplier with supply has no consumer mass");
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (g[j] != -kInf) s += std::exp(lrow[j] + g[j] - hi);
      }
      f[i] = std::log(problem.supply[i]) - (hi + std::log(s));
    }
  }

  TransportPlan plan{DenseMatrix(m, n), 0.0};
  for (std::size_t i = 0; i < m; ++i) {
    if (f[i] == -kInf) continue;
    for (std::size_t j = 0; j < n; ++j) {
      if (g[j] == -kInf) continue;
      plan.gamma(i, j) = std::exp(f[i] + log_kernel(i, j) + g[j]);
    }
  }
  plan.marginal_error = marginal_deviation(problem, plan.gamma);
  return plan;
}

// ---------------------------------------------------------------------------
// Transportation simplex.
//
// The basis is a spanning tree over m row nodes and n column nodes (column j is node
// m + j) with m + n - 1 cells. Supplies are perturbed by delta (and the last demand by
// m * delta) so that no basic flow is ever zero, which rules out cycling. The final
// basis is re-solved with the unperturbed marginals.

struct BasisCell {
  std::size_t row;
  std::size_t col;
  double flow;
};

class TransportSimplex {
 public:
  explicit TransportSimplex(const TransportProblem& problem)
      : p_(problem), m_(problem.suppliers()), n_(problem.consumers()) {}

  TransportPlan solve() {
    const double total = std::accumulate(p_.supply.begin(), p_.supply.end(), 0.0);
    const double delta = std::max(total, 1.0) * 1e-9 / static_cast<double>(m_ + n_);
    std::vector<double> a(p_.supply);
    std::vector<double> b(p_.demand);
    for (auto& x : a) x += delta;
    b.back() += delta * static_cast<double>(m_);
    northwest_corner(a, b);

    const double tol = 1e-11 * std::max(1.0, max_cost(p_.cost));
    const std::size_t max_pivots = 200'000 + 50 * m_ * n_;
    std::size_t pivots = 0;
    while (true) {
      rebuild_adjacency();
      compute_potentials();
      std::size_t enter_i = 0;
      std::size_t enter_j = 0;
      double best = -tol;
      for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          if (basic_[i * n_ + j] >= 0) continue;
          const double r = p_.cost(i, j) - row_pot_[i] - col_pot_[j];
          if (r < best) {
            best = r;
            enter_i = i;
            enter_j = j;
          }
        }
      }
      if (best == -tol) break;
      if (++pivots > max_pivots) throw InvariantViolation("transportation simplex did not terminate");
      pivot(enter_i, enter_j);
    }

    // Exact marginals on the optimal basis.
    resolve_flows(p_.supply, p_.demand);
    TransportPlan plan{DenseMatrix(m_, n_), 0.0};
    for (const auto& cell : basis_) plan.gamma(cell.row, cell.col) = std::max(cell.flow, 0.0);
    plan.marginal_error = marginal_deviation(p_, plan.gamma);
    return plan;
  }

 private:
  void northwest_corner(std::vector<double> a, std::vector<double> b) {
    basic_.assign(m_ * n_, -1);
    basis_.clear();
    std::size_t i = 0;
    std::size_t j = 0;
    while (true) {
      const double q = std::max(0.0, std::min(a[i], b[j]));
      add_basic(i, j, q);
      a[i] -= q;
      b[j] -= q;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) {
        ++j;
      } else if (j == n_ - 1) {
        ++i;
      } else if (a[i] <= b[j]) {
        ++i;
      } else {
        ++j;
      }
    }
  }

  void add_basic(std::size_t i, std::size_t j, double flow) {
    basic_[i * n_ + j] = static_cast<long>(basis_.size());
    basis_.push_back({i, j, flow});
  }

  void rebuild_adjacency() {
    adjacency_.assign(m_ + n_, {});
    for (std::size_t e = 0; e < basis_.size(); ++e) {
      adjacency_[basis_[e].row].push_back(e);
      adjacency_[m_ + basis_[e].col].push_back(e);
    }
  }

  std::size_t other_end(std::size_t e, std::size_t node) const {
    return node < m_ ? m_ + basis_[e].col : basis_[e].row;
  }

  void compute_potentials() {
    row_pot_.assign(m_, kInf);
    col_pot_.assign(n_, kInf);
    std::vector<char> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{0};
    row_pot_[0] = 0.0;
    seen[0] = 1;
    while (!queue.empty()) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t e : adjacency_[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = 1;
        const double c = p_.cost(basis_[e].row, basis_[e].col);
        if (next < m_) {
          row_pot_[next] = c - col_pot_[basis_[e].col];
        } else {
          col_pot_[next - m_] = c - row_pot_[basis_[e].row];
        }
        queue.push_back(next);
      }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
      throw InvariantViolation("transportation simplex basis is not spanning");
    }
  }

  void pivot(std::size_t enter_i, std::size_t enter_j) {
    // Tree path from row node enter_i to column node enter_j.
    const std::size_t start = enter_i;
    const std::size_t goal = m_ + enter_j;
    std::vector<long> parent_edge(m_ + n_, -1);
    std::vector<char> seen(m_ + n_, 0);
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty() && !seen[goal]) {
      const std::size_t node = queue.front();
      queue.pop_front();
      for (std::size_t e : adjacency_[node]) {
        const std::size_t next = other_end(e, node);
        if (seen[next]) continue;
        seen[next] = 1;
        parent_edge[next] = static_cast<long>(e);
        queue.push_back(next);
      }
    }
    if (!seen[goal]) throw InvariantViolation("transportation simplex basis is disconnected");

    // Walking back from the column node, edges alternate -, +, -, ..., -.
    std::vector<std::size_t> path;
    for (std::size_t node = goal; node != start;) {
      const auto e = static_cast<std::size_t>(parent_edge[node]);
      path.push_back(e);
      node = other_end(e, node);
    }
    double theta = kInf;
    std::size_t leaving = path.front();
    for (std::size_t k = 0; k < path.size(); k += 2) {
      if (basis_[path[k]].flow < theta) {
        theta = basis_[path[k]].flow;
        leaving = path[k];
      }
    }
    for (std::size_t k = 0; k < path.size(); ++k) {
      basis_[path[k]].flow += (k % 2 == 0) ? -theta : theta;
    }

    const BasisCell old = basis_[leaving];
    basic_[old.row * n_ + old.col] = -1;
    basis_[leaving] = {enter_i, enter_j, theta};
    basic_[enter_i * n_ + enter_j] = static_cast<long>(leaving);
  }

  // Leaf elimination: a leaf node's single remaining edge carries its residual.
  void resolve_flows(const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> residual(m_ + n_);
    for (std::size_t i = 0; i < m_; ++i) residual[i] = a[i];
    for (std::size_t j = 0; j < n_; ++j) residual[m_ + j] = b[j];
    rebuild_adjacency();
    std::vector<std::size_t> degree(m_ + n_);
    for (std::size_t v = 0; v < m_ + n_; ++v) degree[v] = adjacency_[v].size();
    std::vector<char> edge_done(basis_.size(), 0);
    std::deque<std::size_t> leaves;
    for (std::size_t v = 0; v < m_ + n_; ++v) {
      if (degree[v] == 1) leaves.push_back(v);
    }
    while (!leaves.empty()) {
      const std::size_t leaf = leaves.front();
      leaves.pop_front();
      if (degree[leaf] != 1) continue;
      std::size_t edge = 0;
      for (std::size_t e : adjacency_[leaf]) {
        if (!edge_done[e]) edge = e;
      }
      edge_done[edge] = 1;
      const std::size_t other = other_end(edge, leaf);
      basis_[edge].flow = residual[leaf];
      residual[other] -= residual[leaf];
      residual[leaf] = 0.0;
      --degree[leaf];
      if (--degree[other] == 1) leaves.push_back(other);
    }
  }

  const TransportProblem& p_;
  std::size_t m_;
  std::size_t n_;
  std::vector<BasisCell> basis_;
  std::vector<long> basic_;
  std::vector<std::vector<std::size_t>> adjacency_;
  std::vector<double> row_pot_;
  std::vector<double> col_pot_;
};

}  // namespace

void TransportProblem::validate() const {
  const std::size_t m = supply.size();
  const std::size_t n = demand.size();
  if (m == 0 || n == 0) throw ValidationError("transport problem needs suppliers and consumers");
  if (cost.rows() != m || cost.cols() != n) {
    throw ShapeError("cost matrix shape does not match supply/demand lengths");
  }
  for (double c : cost.data()) {
    if (!std::isfinite(c) || c < 0.0) throw ValidationError("costs must be finite and >= 0");
  }
  double sx = 0.0;
  double sy = 0.0;
  for (double x : supply) {
    if (!std::isfinite(x) || x < 0.0) throw ValidationError("supplies must be finite and >= 0");
    sx += x;
  }
  for (double y : demand) {
    if (!std::isfinite(y) || y < 0.0) throw ValidationError("demands must be finite and >= 0");
    sy += y;
  }
  if (std::abs(sx - sy) > 1e-9 * std::max({sx, sy, 1e-300})) {
    std::ostringstream out;
    out << "transport problem is unbalanced: total supply " << sx << " vs demand " << sy;
    throw ValidationError(out.str());
  }
}

void SinkhornConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be > 0");
  if (iterations < 1) throw ValidationError("Sinkhorn iteration count must be >= 1");
}

TransportPlan sinkhorn_solve(const TransportProblem& problem, const SinkhornConfig& config) {
  config.validate();
  problem.validate();
  return config.log_domain ? sinkhorn_log(problem, config) : sinkhorn_plain(problem, config);
}

TransportPlan exact_solve(const TransportProblem& problem) {
  problem.validate();
  if (problem.suppliers() * problem.consumers() > kExactSolveMaxCells) {
    throw ValidationError("exact_solve is limited to m*n <= " + std::to_string(kExactSolveMaxCells));
  }
  return TransportSimplex(problem).solve();
}

double plan_cost(const TransportProblem& problem, const TransportPlan& plan) {
  if (plan.gamma.rows() != problem.cost.rows() || plan.gamma.cols() != problem.cost.cols()) {
    throw ShapeError("plan shape does not match the cost matrix");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < plan.gamma.size(); ++k) {
    total += plan.gamma.data()[k] * problem.cost.data()[k];
  }
  return total;
}

double marginal_deviation(const TransportProblem& problem, const DenseMatrix& gamma) {
  const std::size_t m = gamma.rows();
  const std::size_t n = gamma.cols();
  double worst = 0.0;
  std::vector<double> col(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      row += gamma(i, j);
      col[j] += gamma(i, j);
    }
    worst = std::max(worst, std::abs(row - problem.supply[i]));
  }
  for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(col[j] - problem.demand[j]));
  return worst;
}

}  // namespace otmask
