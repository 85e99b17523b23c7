// Dense two-phase revised simplex for small linear programs. Used for the
// many tiny interpolation LPs (few rows, many columns) where a vertex
// solution is both faster and more exact than an interior point.

#include "rlmpc/conic.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace rlmpc::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Standardized {
  MatrixXd E;  // min cost'x  s.t. E x = f, x >= 0
  VectorXd f;
  VectorXd cost;
  std::vector<int> plus, minus;  // column of z_j^+ / z_j^- (-1 if absent)
};

// Rows of G grouped as sparse maps, duplicates merged.
std::vector<std::map<int, double>> rows_of(int nrows, const std::vector<std::tuple<int, int, double>>& t) {
  std::vector<std::map<int, double>> rows(nrows);
  for (const auto& [r, c, v] : t) rows[r][c] += v;
  for (auto& row : rows)
    for (auto it = row.begin(); it != row.end();) it = it->second == 0.0 ? row.erase(it) : std::next(it);
  return rows;
}

bool is_bound_row(const std::map<int, double>& row, double h) {
  return row.size() == 1 && row.begin()->second < 0.0 && h == 0.0;
}

Standardized standardize(const ConicForm& f) {
  const auto grows = rows_of(f.m, f.G);
  const auto arows = rows_of(f.p, f.A);
  std::vector<char> nonneg(f.n, 0);
  std::vector<int> structural;
  for (int r = 0; r < f.m; ++r) {
    if (is_bound_row(grows[r], f.h[r]))
      nonneg[grows[r].begin()->first] = 1;
    else
      structural.push_back(r);
  }
  Standardized st;
  st.plus.assign(f.n, -1);
  st.minus.assign(f.n, -1);
  int cols = 0;
  for (int j = 0; j < f.n; ++j) {
    st.plus[j] = cols++;
    if (!nonneg[j]) st.minus[j] = cols++;
  }
  const int nslack = static_cast<int>(structural.size());
  const int rows = f.p + nslack;
  st.E = MatrixXd::Zero(rows, cols + nslack);
  st.f.resize(rows);
  st.cost = VectorXd::Zero(cols + nslack);
  auto put_row = [&](int r, const std::map<int, double>& row) {
    for (const auto& [j, v] : row) {
      st.E(r, st.plus[j]) += v;
      if (st.minus[j] >= 0) st.E(r, st.minus[j]) -= v;
    }
  };
  for (int r = 0; r < f.p; ++r) {
    put_row(r, arows[r]);
    st.f[r] = f.b[r];
  }
  for (int k = 0; k < nslack; ++k) {
    put_row(f.p + k, grows[structural[k]]);
    st.E(f.p + k, cols + k) = 1.0;
    st.f[f.p + k] = f.h[structural[k]];
  }
  for (int j = 0; j < f.n; ++j) {
    st.cost[st.plus[j]] = f.c[j];
    if (st.minus[j] >= 0) st.cost[st.minus[j]] = -f.c[j];
  }
  return st;
}

enum class Outcome { Optimal, Unbounded, IterationLimit, Singular };

class RevisedSimplex {
 public:
  RevisedSimplex(MatrixXd E, VectorXd f) : E_(std::move(E)), f_(std::move(f)) {
    m_ = static_cast<int>(E_.rows());
    N_ = static_cast<int>(E_.cols());
    for (int i = 0; i < m_; ++i) {
      const double scale = std::max(E_.row(i).lpNorm<Eigen::Infinity>(), std::abs(f_[i]));
      if (scale > 0.0) {
        E_.row(i) /= scale;
        f_[i] /= scale;
      }
      if (f_[i] < 0.0) {
        E_.row(i) *= -1.0;
        f_[i] *= -1.0;
      }
    }
    basis_.resize(m_);
    in_basis_.assign(N_ + m_, 0);
    for (int i = 0; i < m_; ++i) {
      basis_[i] = N_ + i;
      in_basis_[N_ + i] = 1;
    }
  }

  // Phase 1 returns the residual infeasibility (sum of artificials).
  Outcome phase1(double& infeas, int& iters) {
    VectorXd cost = VectorXd::Zero(N_ + m_);
    cost.tail(m_).setOnes();
    const Outcome o = run(cost, iters);
    infeas = 0.0;
    const VectorXd xb = basic_values();
    for (int i = 0; i < m_; ++i)
      if (basis_[i] >= N_) infeas += std::max(xb[i], 0.0);
    return o;
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (basis_[i] < N_) continue;
      factor();
      VectorXd ei = VectorXd::Zero(m_);
      ei[i] = 1.0;
      const VectorXd rho = lu_.transpose().solve(ei);
      const VectorXd row = E_.transpose() * rho;
      int best = -1;
      double bv = 1e-9;
      for (int j = 0; j < N_; ++j)
        if (!in_basis_[j] && std::abs(row[j]) > bv) {
          bv = std::abs(row[j]);
          best = j;
        }
      if (best >= 0) pivot(i, best);
    }
  }

  Outcome phase2(const VectorXd& cost_real, int& iters) {
    VectorXd cost = VectorXd::Zero(N_ + m_);
    cost.head(N_) = cost_real;
    return run(cost, iters, /*allow_artificial=*/false);
  }

  VectorXd solution() {
    factor();
    const VectorXd xb = basic_values();
    VectorXd x = VectorXd::Zero(N_);
    for (int i = 0; i < m_; ++i)
      if (basis_[i] < N_) x[basis_[i]] = std::max(xb[i], 0.0);
    return x;
  }

  double rhs_norm() const { return f_.size() ? f_.lpNorm<Eigen::Infinity>() : 0.0; }

 private:
  VectorXd column(int j) const {
    if (j < N_) return E_.col(j);
    VectorXd e = VectorXd::Zero(m_);
    e[j - N_] = 1.0;
    return e;
  }

  void factor() {
    MatrixXd B(m_, m_);
    for (int i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
    lu_.compute(B);
  }

  VectorXd basic_values() const { return lu_.solve(f_); }

  void pivot(int r, int q) {
    in_basis_[basis_[r]] = 0;
    basis_[r] = q;
    in_basis_[q] = 1;
  }

  Outcome run(const VectorXd& cost, int& iters, bool allow_artificial = true) {
    const double cmax = std::max(1.0, cost.lpNorm<Eigen::Infinity>());
    const double opt_tol = 1e-11 * cmax;
    const double piv_tol = 1e-7;
    const double harris_tol = 1e-10;
    const int max_iter = 50 * (m_ + N_) + 1000;
    bool bland = false;
    int degenerate = 0;
    for (int it = 0; it < max_iter; ++it, ++iters) {
      factor();
      if (lu_.rcond() < 1e-14) return Outcome::Singular;
      const VectorXd xb = basic_values();
      VectorXd cb(m_);
      for (int i = 0; i < m_; ++i) cb[i] = cost[basis_[i]];
      const VectorXd y = lu_.transpose().solve(cb);
      const VectorXd dr = cost.head(N_) - E_.transpose() * y;

      int q = -1;
      double best = -opt_tol;
      for (int j = 0; j < N_; ++j) {
        if (in_basis_[j] || dr[j] >= -opt_tol) continue;
        if (bland) {
          q = j;
          break;
        }
        if (dr[j] < best) {
          best = dr[j];
          q = j;
        }
      }
      if (q < 0 && allow_artificial) {
        for (int i = 0; i < m_ && q < 0; ++i) {
          const int j = N_ + i;
          if (!in_basis_[j] && cost[j] - y[i] < -opt_tol) q = j;
        }
      }
      // reduced costs from a nearly singular basis cannot certify optimality
      if (q < 0) return lu_.rcond() < 1e-10 ? Outcome::Singular : Outcome::Optimal;

      const VectorXd a = lu_.solve(column(q));
      // Harris two-pass ratio test: bound the step with a small relaxation of
      // x_B >= 0, then pick the largest pivot among the rows within the bound.
      double bound = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m_; ++i)
        if (a[i] > piv_tol) bound = std::min(bound, (std::max(xb[i], 0.0) + harris_tol) / a[i]);
      int r = -1;
      for (int i = 0; i < m_; ++i) {
        if (a[i] <= piv_tol || std::max(xb[i], 0.0) / a[i] > bound) continue;
        if (r < 0 || (bland ? basis_[i] < basis_[r] : a[i] > a[r])) r = i;
      }
      const double theta = r < 0 ? 0.0 : std::max(xb[r], 0.0) / a[r];
      if (r < 0) return Outcome::Unbounded;
      degenerate = theta <= 1e-12 ? degenerate + 1 : 0;
      if (degenerate > 50) bland = true;
      pivot(r, q);
    }
    return Outcome::IterationLimit;
  }

  MatrixXd E_;
  VectorXd f_;
  int m_ = 0, N_ = 0;
  std::vector<int> basis_;
  std::vector<char> in_basis_;
  Eigen::PartialPivLU<MatrixXd> lu_;
};

}  // namespace

int simplex_row_count(const ConicForm& f) {
  if (!f.soc_dims.empty()) return -1;
  const auto grows = rows_of(f.m, f.G);
  int rows = f.p;
  for (int r = 0; r < f.m; ++r)
    if (!is_bound_row(grows[r], f.h[r])) ++rows;
  return rows;
}

BackendResult solve_simplex(const ConicForm& f, const SolverSettings& settings) {
  BackendResult out;
  const Standardized st = standardize(f);
  RevisedSimplex lp(st.E, st.f);

  double infeas = 0.0;
  const Outcome o1 = lp.phase1(infeas, out.iterations);
  if (o1 != Outcome::Optimal) return out;
  if (infeas > settings.feasibility_tol * (1.0 + lp.rhs_norm())) {
    out.status = SolveStatus::Infeasible;
    return out;
  }
  lp.drive_out_artificials();
  const Outcome o2 = lp.phase2(st.cost, out.iterations);
  if (o2 == Outcome::Unbounded) {
    out.status = SolveStatus::Unbounded;
    return out;
  }
  if (o2 != Outcome::Optimal) return out;

  const VectorXd xs = lp.solution();
  out.x.resize(f.n);
  for (int j = 0; j < f.n; ++j) out.x[j] = xs[st.plus[j]] - (st.minus[j] >= 0 ? xs[st.minus[j]] : 0.0);
  out.status = SolveStatus::Optimal;
  return out;
}

}  // namespace rlmpc::conic
