// Primal-dual interior point method for LP/SOCP in standard conic form,
// homogeneous self-dual embedding with Nesterov-Todd scaling and Mehrotra
// predictor-corrector steps (the ECOS scheme), factoring a regularized
// quasi-definite KKT system with a sparse LDL' and iterative refinement.

#include "rlmpc/conic.hpp"

#include <Eigen/Dense>
#include <Eigen/OrderingMethods>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

namespace rlmpc::conic {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct ConeLayout {
  int l = 0;
  std::vector<int> start;
  std::vector<int> dim;
  int degree() const { return l + static_cast<int>(dim.size()); }
};

double soc_residual(const VectorXd& v, int st, int q) {
  return v[st] * v[st] - v.segment(st + 1, q - 1).squaredNorm();
}

// Smallest "eigenvalue" of v with respect to the cone; > 0 iff interior.
double cone_min_eig(const ConeLayout& K, const VectorXd& v) {
  double e = kInf;
  for (int i = 0; i < K.l; ++i) e = std::min(e, v[i]);
  for (size_t k = 0; k < K.dim.size(); ++k) {
    const int st = K.start[k], q = K.dim[k];
    e = std::min(e, v[st] - v.segment(st + 1, q - 1).norm());
  }
  return e;
}

void add_identity(const ConeLayout& K, VectorXd& v, double t) {
  for (int i = 0; i < K.l; ++i) v[i] += t;
  for (int st : K.start) v[st] += t;
}

// Jordan product u o v.
VectorXd cone_prod(const ConeLayout& K, const VectorXd& u, const VectorXd& v) {
  VectorXd w(u.size());
  for (int i = 0; i < K.l; ++i) w[i] = u[i] * v[i];
  for (size_t k = 0; k < K.dim.size(); ++k) {
    const int st = K.start[k], q = K.dim[k];
    w[st] = u.segment(st, q).dot(v.segment(st, q));
    w.segment(st + 1, q - 1) = u[st] * v.segment(st + 1, q - 1) + v[st] * u.segment(st + 1, q - 1);
  }
  return w;
}

// Solves lambda o x = v.
VectorXd cone_div(const ConeLayout& K, const VectorXd& lam, const VectorXd& v) {
  VectorXd x(v.size());
  for (int i = 0; i < K.l; ++i) x[i] = v[i] / lam[i];
  for (size_t k = 0; k < K.dim.size(); ++k) {
    const int st = K.start[k], q = K.dim[k];
    const double l0 = lam[st];
    const double rho = soc_residual(lam, st, q);
    const double nu = lam.segment(st + 1, q - 1).dot(v.segment(st + 1, q - 1));
    const double x0 = (l0 * v[st] - nu) / rho;
    x[st] = x0;
    x.segment(st + 1, q - 1) = (v.segment(st + 1, q - 1) - x0 * lam.segment(st + 1, q - 1)) / l0;
  }
  return x;
}

// Largest alpha with lam + alpha*v in the cone.
double max_step(const ConeLayout& K, const VectorXd& lam, const VectorXd& v) {
  double alpha = kInf;
  for (int i = 0; i < K.l; ++i)
    if (v[i] < 0.0) alpha = std::min(alpha, -lam[i] / v[i]);
  for (size_t k = 0; k < K.dim.size(); ++k) {
    const int st = K.start[k], q = K.dim[k];
    const double a = soc_residual(v, st, q);
    const double b = 2.0 * (lam[st] * v[st] - lam.segment(st + 1, q - 1).dot(v.segment(st + 1, q - 1)));
    const double c = std::max(soc_residual(lam, st, q), 0.0);
    double root = kInf;
    auto consider = [&](double r) {
      if (r > 0.0 && std::isfinite(r)) root = std::min(root, r);
    };
    const double scale = std::max({std::abs(a), std::abs(b), c, 1e-300});
    if (std::abs(a) <= 1e-14 * scale) {
      if (b < 0.0) consider(-c / b);
    } else {
      const double disc = b * b - 4.0 * a * c;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
        if (qq != 0.0) {
          consider(qq / a);
          consider(c / qq);
        }
      }
    }
    if (v[st] < 0.0) consider(-lam[st] / v[st]);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

struct NtScaling {
  VectorXd lp;               // W_ii = sqrt(s_i / z_i)
  std::vector<MatrixXd> W;   // dense per second-order cone
  std::vector<MatrixXd> W2;
  VectorXd lambda;
};

bool compute_scaling(const ConeLayout& K, const VectorXd& s, const VectorXd& z, NtScaling& sc) {
  sc.lp.resize(K.l);
  for (int i = 0; i < K.l; ++i) {
    if (!(s[i] > 0.0 && z[i] > 0.0)) return false;
    sc.lp[i] = std::sqrt(s[i] / z[i]);
  }
  sc.W.resize(K.dim.size());
  sc.W2.resize(K.dim.size());
  for (size_t k = 0; k < K.dim.size(); ++k) {
    const int st = K.start[k], q = K.dim[k];
    const double sres = soc_residual(s, st, q), zres = soc_residual(z, st, q);
    if (!(sres > 0.0 && zres > 0.0 && s[st] > 0.0 && z[st] > 0.0)) return false;
    const VectorXd sb = s.segment(st, q) / std::sqrt(sres);
    const VectorXd zb = z.segment(st, q) / std::sqrt(zres);
    const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
    VectorXd wb(q);
    wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
    wb.tail(q - 1) = (sb.tail(q - 1) - zb.tail(q - 1)) / (2.0 * gamma);
    const double eta = std::pow(sres / zres, 0.25);
    MatrixXd W(q, q);
    W(0, 0) = wb[0];
    W.block(0, 1, 1, q - 1) = wb.tail(q - 1).transpose();
    W.block(1, 0, q - 1, 1) = wb.tail(q - 1);
    W.block(1, 1, q - 1, q - 1) = MatrixXd::Identity(q - 1, q - 1) +
                                  wb.tail(q - 1) * wb.tail(q - 1).transpose() / (1.0 + wb[0]);
    W *= eta;
    sc.W[k] = W;
    sc.W2[k] = W * W;
  }
  sc.lambda.resize(z.size());
  for (int i = 0; i < K.l; ++i) sc.lambda[i] = std::sqrt(s[i] * z[i]);
  for (size_t k = 0; k < K.dim.size(); ++k)
    sc.lambda.segment(K.start[k], K.dim[k]) = sc.W[k] * z.segment(K.start[k], K.dim[k]);
  return true;
}

VectorXd apply_W(const ConeLayout& K, const NtScaling& sc, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(K.l) = sc.lp.cwiseProduct(v.head(K.l));
  for (size_t k = 0; k < K.dim.size(); ++k)
    out.segment(K.start[k], K.dim[k]) = sc.W[k] * v.segment(K.start[k], K.dim[k]);
  return out;
}

VectorXd apply_W2(const ConeLayout& K, const NtScaling& sc, const VectorXd& v) {
  VectorXd out(v.size());
  out.head(K.l) = sc.lp.cwiseAbs2().cwiseProduct(v.head(K.l));
  for (size_t k = 0; k < K.dim.size(); ++k)
    out.segment(K.start[k], K.dim[k]) = sc.W2[k] * v.segment(K.start[k], K.dim[k]);
  return out;
}

SpMat make_sparse(int rows, int cols, const std::vector<std::tuple<int, int, double>>& entries) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(entries.size());
  for (const auto& [r, c, v] : entries) t.emplace_back(r, c, v);
  SpMat M(rows, cols);
  M.setFromTriplets(t.begin(), t.end());
  M.prune(0.0);
  return M;
}

// Ruiz equilibration; cone blocks receive a uniform row scale.
void equilibrate(SpMat& A, SpMat& G, const ConeLayout& K, VectorXd& D, VectorXd& EA, VectorXd& EG) {
  const int n = static_cast<int>(A.cols());
  D = VectorXd::Ones(n);
  EA = VectorXd::Ones(A.rows());
  EG = VectorXd::Ones(G.rows());
  auto inv_sqrt = [](double v) { return v > 1e-10 ? 1.0 / std::sqrt(v) : 1.0; };
  for (int pass = 0; pass < 12; ++pass) {
    VectorXd cn = VectorXd::Zero(n), ra = VectorXd::Zero(A.rows()), rg = VectorXd::Zero(G.rows());
    for (int j = 0; j < n; ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) {
        cn[j] = std::max(cn[j], std::abs(it.value()));
        ra[it.row()] = std::max(ra[it.row()], std::abs(it.value()));
      }
      for (SpMat::InnerIterator it(G, j); it; ++it) {
        cn[j] = std::max(cn[j], std::abs(it.value()));
        rg[it.row()] = std::max(rg[it.row()], std::abs(it.value()));
      }
    }
    for (size_t k = 0; k < K.dim.size(); ++k) {
      const double mx = rg.segment(K.start[k], K.dim[k]).maxCoeff();
      rg.segment(K.start[k], K.dim[k]).setConstant(mx);
    }
    VectorXd dc = cn.unaryExpr(inv_sqrt), da = ra.unaryExpr(inv_sqrt), dg = rg.unaryExpr(inv_sqrt);
    A = da.asDiagonal() * A * dc.asDiagonal();
    G = dg.asDiagonal() * G * dc.asDiagonal();
    D = D.cwiseProduct(dc);
    EA = EA.cwiseProduct(da);
    EG = EG.cwiseProduct(dg);
    const double spread = std::max({(cn.array() > 0).any() ? cn.maxCoeff() : 1.0,
                                    ra.size() ? ra.maxCoeff() : 1.0, rg.size() ? rg.maxCoeff() : 1.0});
    if (std::abs(spread - 1.0) < 1e-2 && pass > 1) break;
  }
}

// Up-looking sparse LDL' of a symmetric quasi-definite matrix given by its
// upper triangle, with AMD ordering and sign-aware dynamic regularization:
// pivots whose sign disagrees with the expected inertia (or that are tiny)
// are replaced by +-dyn_delta; iterative refinement absorbs the perturbation.
class QuasiDefiniteLdl {
 public:
  void analyze(const SpMat& upper, std::vector<signed char> signs) {
    const int N = static_cast<int>(upper.rows());
    signs_ = std::move(signs);
    SpMat full = upper.selfadjointView<Eigen::Upper>();
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
    Eigen::AMDOrdering<int> amd;
    amd(full, pinv);
    P_ = pinv.inverse();
    Pinv_ = pinv;
    permute(upper);
    parent_.assign(N, -1);
    std::vector<int> flag(N), lnz(N, 0);
    const int* Cp = C_.outerIndexPtr();
    const int* Ci = C_.innerIndexPtr();
    for (int k = 0; k < N; ++k) {
      flag[k] = k;
      for (int q = Cp[k]; q < Cp[k + 1]; ++q) {
        for (int i = Ci[q]; i < k && flag[i] != k; i = parent_[i]) {
          if (parent_[i] == -1) parent_[i] = k;
          ++lnz[i];
          flag[i] = k;
        }
      }
    }
    Lp_.assign(N + 1, 0);
    for (int k = 0; k < N; ++k) Lp_[k + 1] = Lp_[k] + lnz[k];
    Li_.assign(Lp_[N], 0);
    Lx_.assign(Lp_[N], 0.0);
    D_.assign(N, 0.0);
    psigns_.resize(N);
    for (int k = 0; k < N; ++k) psigns_[k] = signs_[Pinv_.indices()[k]];
  }

  void factor(const SpMat& upper, double eps, double dyn_delta) {
    permute(upper);
    const int N = static_cast<int>(C_.rows());
    const int* Cp = C_.outerIndexPtr();
    const int* Ci = C_.innerIndexPtr();
    const double* Cx = C_.valuePtr();
    std::vector<double> y(N, 0.0);
    std::vector<int> pattern(N), flag(N), lnz(N, 0);
    for (int k = 0; k < N; ++k) {
      int top = N;
      flag[k] = k;
      for (int q = Cp[k]; q < Cp[k + 1]; ++q) {
        int i = Ci[q];
        y[i] += Cx[q];
        int len = 0;
        for (; flag[i] != k; i = parent_[i]) {
          pattern[len++] = i;
          flag[i] = k;
        }
        while (len > 0) pattern[--top] = pattern[--len];
      }
      double dk = y[k];
      y[k] = 0.0;
      for (; top < N; ++top) {
        const int i = pattern[top];
        const double yi = y[i];
        y[i] = 0.0;
        const int end = Lp_[i] + lnz[i];
        for (int q = Lp_[i]; q < end; ++q) y[Li_[q]] -= Lx_[q] * yi;
        const double lki = yi / D_[i];
        dk -= lki * yi;
        Li_[end] = k;
        Lx_[end] = lki;
        ++lnz[i];
      }
      if (psigns_[k] * dk <= eps) dk = psigns_[k] * dyn_delta;
      D_[k] = dk;
    }
  }

  VectorXd solve(const VectorXd& b) const {
    const int N = static_cast<int>(D_.size());
    VectorXd x = P_ * b;
    for (int j = 0; j < N; ++j)
      for (int q = Lp_[j]; q < Lp_[j + 1]; ++q) x[Li_[q]] -= Lx_[q] * x[j];
    for (int j = 0; j < N; ++j) x[j] /= D_[j];
    for (int j = N - 1; j >= 0; --j)
      for (int q = Lp_[j]; q < Lp_[j + 1]; ++q) x[j] -= Lx_[q] * x[Li_[q]];
    return Pinv_ * x;
  }

  bool finite() const {
    for (double d : D_)
      if (!std::isfinite(d)) return false;
    return true;
  }

 private:
  void permute(const SpMat& upper) {
    C_.resize(upper.rows(), upper.cols());
    C_.selfadjointView<Eigen::Upper>() = upper.selfadjointView<Eigen::Upper>().twistedBy(P_);
  }

  std::vector<signed char> signs_, psigns_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> P_, Pinv_;
  SpMat C_;
  std::vector<int> parent_, Lp_, Li_;
  std::vector<double> Lx_, D_;
};

class KktSystem {
 public:
  KktSystem(const SpMat& A, const SpMat& G, const ConeLayout& K, double delta)
      : A_(A), G_(G), K_(K), base_delta_(delta), delta_(delta) {
    n_ = static_cast<int>(A.cols());
    p_ = static_cast<int>(A.rows());
    m_ = static_cast<int>(G.rows());
    const int N = n_ + p_ + m_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(A.nonZeros() + G.nonZeros() + N + 8 * m_);
    for (int i = 0; i < n_; ++i) t.emplace_back(i, i, delta_);
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -delta_);
    for (int j = 0; j < n_; ++j) {
      for (SpMat::InnerIterator it(A, j); it; ++it) t.emplace_back(j, n_ + it.row(), it.value());
      for (SpMat::InnerIterator it(G, j); it; ++it) t.emplace_back(j, n_ + p_ + it.row(), it.value());
    }
    const int z0 = n_ + p_;
    for (int i = 0; i < K_.l; ++i) t.emplace_back(z0 + i, z0 + i, -1.0);
    for (size_t k = 0; k < K_.dim.size(); ++k)
      for (int c = 0; c < K_.dim[k]; ++c)
        for (int r = 0; r <= c; ++r) t.emplace_back(z0 + K_.start[k] + r, z0 + K_.start[k] + c, r == c ? -1.0 : 0.0);
    M_.resize(N, N);
    M_.setFromTriplets(t.begin(), t.end());
    M_.makeCompressed();

    auto locate = [&](int r, int c) {
      const int* outer = M_.outerIndexPtr();
      const int* inner = M_.innerIndexPtr();
      const int* pos = std::lower_bound(inner + outer[c], inner + outer[c + 1], r);
      return static_cast<int>(pos - inner);
    };
    for (int i = 0; i < n_ + p_; ++i) reg_slot_.push_back(locate(i, i));
    for (int i = 0; i < K_.l; ++i) lp_slot_.push_back(locate(z0 + i, z0 + i));
    soc_slot_.resize(K_.dim.size());
    for (size_t k = 0; k < K_.dim.size(); ++k)
      for (int c = 0; c < K_.dim[k]; ++c)
        for (int r = 0; r <= c; ++r) soc_slot_[k].push_back(locate(z0 + K_.start[k] + r, z0 + K_.start[k] + c));
    std::vector<signed char> signs(N, -1);
    std::fill(signs.begin(), signs.begin() + n_, 1);
    ldl_.analyze(M_, std::move(signs));
  }

  bool factor(const NtScaling& sc) {
    sc_ = &sc;
    delta_ = base_delta_;
    return refactor();
  }

  bool refactor() {
    const NtScaling& sc = *sc_;
    double* val = M_.valuePtr();
    for (int i = 0; i < n_ + p_; ++i) val[reg_slot_[i]] = i < n_ ? delta_ : -delta_;
    for (int i = 0; i < K_.l; ++i) val[lp_slot_[i]] = -sc.lp[i] * sc.lp[i] - delta_;
    for (size_t k = 0; k < K_.dim.size(); ++k) {
      int idx = 0;
      for (int c = 0; c < K_.dim[k]; ++c)
        for (int r = 0; r <= c; ++r) val[soc_slot_[k][idx++]] = -sc.W2[k](r, c) - (r == c ? delta_ : 0.0);
    }
    ldl_.factor(M_, 1e-13, std::max(1e-7, delta_));
    return ldl_.finite();
  }

  // Unregularized KKT product.
  VectorXd apply(const VectorXd& u) const {
    const auto x = u.head(n_), y = u.segment(n_, p_), z = u.tail(m_);
    VectorXd out(u.size());
    out.head(n_) = A_.transpose() * y + G_.transpose() * z;
    out.segment(n_, p_) = A_ * x;
    out.tail(m_) = G_ * x - apply_W2(K_, *sc_, z);
    return out;
  }

  // Refined solve; when refinement cannot reach a small residual the factorization
  // was unstable, so the static regularization is raised and the matrix refactored.
  VectorXd solve(const VectorXd& rhs) {
    const double accept = 1e-9 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    for (;;) {
      double nr = 0.0;
      VectorXd u = refine(rhs, nr);
      if (nr <= accept || delta_ >= 1e-5) return u;
      delta_ *= 100.0;
      if (!refactor()) return u;
    }
  }

 private:
  // Iterative refinement against the unregularized matrix. A correction is kept
  // only if it shrinks the residual and stays small next to the solution; near a
  // singular KKT matrix refinement otherwise chases an exploding direction.
  VectorXd refine(const VectorXd& rhs, double& nr) const {
    VectorXd u = ldl_.solve(rhs);
    const double target = 1e-14 * (1.0 + rhs.lpNorm<Eigen::Infinity>());
    VectorXd r = rhs - apply(u);
    nr = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 10 && nr > target; ++it) {
      const VectorXd du = ldl_.solve(r);
      if (!(du.lpNorm<Eigen::Infinity>() <= 1e3 * (1.0 + u.lpNorm<Eigen::Infinity>()))) break;
      const VectorXd un = u + du;
      const VectorXd rn = rhs - apply(un);
      const double nn = rn.lpNorm<Eigen::Infinity>();
      if (!(nn < 0.5 * nr)) break;
      u = un;
      r = rn;
      nr = nn;
    }
    return u;
  }

  const SpMat& A_;
  const SpMat& G_;
  const ConeLayout& K_;
  double base_delta_, delta_;
  int n_ = 0, p_ = 0, m_ = 0;
  SpMat M_;
  std::vector<int> reg_slot_, lp_slot_;
  std::vector<std::vector<int>> soc_slot_;
  QuasiDefiniteLdl ldl_;
  const NtScaling* sc_ = nullptr;
};

struct Metrics {
  double pres = kInf, dres = kInf, gap = kInf, pcost = 0.0, dcost = 0.0;
  double pinf = kInf, dinf = kInf;  // normalized certificate residuals
};

}  // namespace

BackendResult solve_interior_point(const ConicForm& f, const SolverSettings& settings) {
  BackendResult out;
  ConeLayout K;
  K.l = f.num_lp;
  int pos = f.num_lp;
  for (int q : f.soc_dims) {
    K.start.push_back(pos);
    K.dim.push_back(q);
    pos += q;
  }

  const SpMat A0 = make_sparse(f.p, f.n, f.A);
  const SpMat G0 = make_sparse(f.m, f.n, f.G);

  if (f.n == 0) {
    const bool ok = (f.b.size() == 0 || f.b.lpNorm<Eigen::Infinity>() <= settings.feasibility_tol) &&
                    (f.m == 0 || cone_min_eig(K, f.h) >= -settings.feasibility_tol);
    out.status = ok ? SolveStatus::Optimal : SolveStatus::Infeasible;
    out.x = VectorXd(0);
    return out;
  }

  SpMat A = A0, G = G0;
  VectorXd D, EA, EG;
  equilibrate(A, G, K, D, EA, EG);
  const VectorXd c = D.cwiseProduct(f.c);
  const VectorXd b = EA.cwiseProduct(f.b);
  const VectorXd h = EG.cwiseProduct(f.h);

  const int n = f.n, p = f.p, m = f.m;
  const double feas_target = std::min(settings.feasibility_tol, 1e-7) * 1e-3;
  const double gap_target = std::min(settings.gap_tol, 1e-7) * 1e-3;

  KktSystem kkt(A, G, K, 1e-9);
  NtScaling sc;
  // initial point with W = I
  sc.lp = VectorXd::Ones(K.l);
  for (int q : K.dim) {
    sc.W.push_back(MatrixXd::Identity(q, q));
    sc.W2.push_back(MatrixXd::Identity(q, q));
  }
  if (!kkt.factor(sc)) return out;

  VectorXd rhs(n + p + m);
  rhs << VectorXd::Zero(n), b, h;
  VectorXd u = kkt.solve(rhs);
  VectorXd x = u.head(n);
  VectorXd s = -u.tail(m);
  rhs << -c, VectorXd::Zero(p), VectorXd::Zero(m);
  u = kkt.solve(rhs);
  VectorXd y = u.segment(n, p);
  VectorXd z = u.tail(m);
  {
    const double as = cone_min_eig(K, s), az = cone_min_eig(K, z);
    if (m > 0) {
      if (as < 1.0) add_identity(K, s, 1.0 - as);
      if (az < 1.0) add_identity(K, z, 1.0 - az);
    }
  }
  double tau = 1.0, kappa = 1.0;

  const double bscale = 1.0 + std::max(f.b.size() ? f.b.lpNorm<Eigen::Infinity>() : 0.0,
                                       f.h.size() ? f.h.lpNorm<Eigen::Infinity>() : 0.0);
  const double cscale = 1.0 + f.c.lpNorm<Eigen::Infinity>();
  const int degree = K.degree();

  auto metrics = [&](VectorXd& xu) {
    Metrics mt;
    xu = D.cwiseProduct(x);
    const VectorXd yu = EA.cwiseProduct(y), zu = EG.cwiseProduct(z), su = s.cwiseQuotient(EG);
    const VectorXd Ax = A0 * xu, Gx = G0 * xu;
    const VectorXd Aty = A0.transpose() * yu + G0.transpose() * zu;
    double pr = 0.0;
    if (p) pr = (Ax - f.b * tau).lpNorm<Eigen::Infinity>();
    if (m) pr = std::max(pr, (Gx + su - f.h * tau).lpNorm<Eigen::Infinity>());
    mt.pres = pr / tau / bscale;
    mt.dres = (Aty + f.c * tau).lpNorm<Eigen::Infinity>() / tau / cscale;
    const double cx = f.c.dot(xu), by_hz = f.b.dot(yu) + f.h.dot(zu);
    mt.pcost = cx / tau;
    mt.dcost = -by_hz / tau;
    mt.gap = s.dot(z) / (tau * tau);
    if (by_hz < 0.0) mt.pinf = Aty.lpNorm<Eigen::Infinity>() / (-by_hz);
    if (cx < 0.0) {
      double r = 0.0;
      if (p) r = Ax.lpNorm<Eigen::Infinity>();
      if (m) r = std::max(r, (Gx + su).lpNorm<Eigen::Infinity>());
      mt.dinf = r / (-cx);
    }
    xu /= tau;
    return mt;
  };
  auto converged = [](const Metrics& mt, double ft, double gt) {
    return mt.pres <= ft && mt.dres <= ft &&
           mt.gap <= gt * std::max(1.0, std::min(std::abs(mt.pcost), std::abs(mt.dcost)));
  };
  auto score = [](const Metrics& mt) {
    return std::max({mt.pres, mt.dres, mt.gap / std::max(1.0, std::min(std::abs(mt.pcost), std::abs(mt.dcost)))});
  };

  VectorXd best_x;
  Metrics best;
  double best_score = kInf;
  double best_pinf = kInf, best_dinf = kInf;

  const bool trace = std::getenv("RLMPC_IPM_TRACE") != nullptr;
  int it = 0;
  for (;; ++it) {
    VectorXd xu;
    const Metrics mt = metrics(xu);
    if (trace)
      std::fprintf(stderr, "ipm %3d pres %.2e dres %.2e gap %.2e pcost %.10e tau %.2e kap %.2e pinf %.2e\n", it,
                   mt.pres, mt.dres, mt.gap, mt.pcost, tau, kappa, mt.pinf);
    if (!std::isfinite(mt.pres) || !std::isfinite(mt.dres)) break;
    if (score(mt) < best_score) {
      best_score = score(mt);
      best = mt;
      best_x = xu;
    }
    best_pinf = std::min(best_pinf, mt.pinf);
    best_dinf = std::min(best_dinf, mt.dinf);
    if (converged(mt, feas_target, gap_target)) {
      out.status = SolveStatus::Optimal;
      out.x = xu;
      out.iterations = it;
      return out;
    }
    if (mt.pinf <= feas_target) {
      out.status = SolveStatus::Infeasible;
      out.iterations = it;
      return out;
    }
    if (mt.dinf <= feas_target) {
      out.status = SolveStatus::Unbounded;
      out.iterations = it;
      return out;
    }
    if (it >= settings.max_iterations) break;

    if (!compute_scaling(K, s, z, sc)) {
      if (trace) std::fprintf(stderr, "ipm: scaling failed\n");
      break;
    }
    if (!kkt.factor(sc)) {
      if (trace) std::fprintf(stderr, "ipm: factorization failed\n");
      break;
    }
    const VectorXd& lam = sc.lambda;

    const VectorXd rx = A.transpose() * y + G.transpose() * z + c * tau;
    const VectorXd ry = -(A * x) + b * tau;
    const VectorXd rz = s + G * x - h * tau;
    const double rt = kappa + c.dot(x) + b.dot(y) + h.dot(z);

    rhs << -c, b, h;
    const VectorXd u1 = kkt.solve(rhs);
    const double denom_base = kappa / tau - c.dot(u1.head(n)) - b.dot(u1.segment(n, p)) - h.dot(u1.tail(m));

    auto direction = [&](const VectorXd& rc, double rk, double scale_res, VectorXd& dx, VectorXd& dy,
                         VectorXd& dz, VectorXd& ds_t, VectorXd& dz_t, double& dtau, double& dkap) {
      const VectorXd lrc = cone_div(K, lam, rc);
      rhs << -scale_res * rx, scale_res * ry, -scale_res * rz - apply_W(K, sc, lrc);
      const VectorXd u2 = kkt.solve(rhs);
      dtau = (rk / tau + scale_res * rt + c.dot(u2.head(n)) + b.dot(u2.segment(n, p)) + h.dot(u2.tail(m))) /
             denom_base;
      const VectorXd d = u2 + dtau * u1;
      dx = d.head(n);
      dy = d.segment(n, p);
      dz = d.tail(m);
      dkap = (rk - kappa * dtau) / tau;
      dz_t = apply_W(K, sc, dz);
      ds_t = lrc - dz_t;
    };
    auto step_len = [&](const VectorXd& ds_t, const VectorXd& dz_t, double dtau, double dkap) {
      double a = std::min(max_step(K, lam, ds_t), max_step(K, lam, dz_t));
      if (dtau < 0.0) a = std::min(a, -tau / dtau);
      if (dkap < 0.0) a = std::min(a, -kappa / dkap);
      return a;
    };

    VectorXd dx, dy, dz, ds_t, dz_t;
    double dtau = 0.0, dkap = 0.0;
    // predictor
    const VectorXd ll = cone_prod(K, lam, lam);
    direction(-ll, -tau * kappa, 1.0, dx, dy, dz, ds_t, dz_t, dtau, dkap);
    const double a_aff = std::min(1.0, step_len(ds_t, dz_t, dtau, dkap));
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 1e-6, 1.0);
    const double mu = (s.dot(z) + tau * kappa) / (degree + 1);

    // corrector
    VectorXd rc = -ll - cone_prod(K, ds_t, dz_t);
    add_identity(K, rc, sigma * mu);
    const double rk = -tau * kappa - dtau * dkap + sigma * mu;
    direction(rc, rk, 1.0 - sigma, dx, dy, dz, ds_t, dz_t, dtau, dkap);
    const double alpha = std::min(1.0, 0.99 * step_len(ds_t, dz_t, dtau, dkap));
    if (!(alpha > 1e-10)) {
      if (trace) std::fprintf(stderr, "ipm: step %.2e too short\n", alpha);
      break;
    }

    x += alpha * dx;
    y += alpha * dy;
    z += alpha * dz;
    s += alpha * apply_W(K, sc, ds_t);
    tau += alpha * dtau;
    kappa += alpha * dkap;
    if (!(tau > 0.0 && kappa > 0.0) || (m > 0 && (cone_min_eig(K, s) <= 0.0 || cone_min_eig(K, z) <= 0.0))) {
      if (trace) std::fprintf(stderr, "ipm: left the cone\n");
      break;
    }
  }

  out.iterations = it;
  // stalled: accept at the contract tolerance if the best iterate qualifies
  if (best_x.size() && converged(best, settings.feasibility_tol, settings.gap_tol)) {
    out.status = SolveStatus::Optimal;
    out.x = best_x;
  } else if (best_pinf <= settings.feasibility_tol) {
    out.status = SolveStatus::Infeasible;
  } else if (best_dinf <= settings.feasibility_tol) {
    out.status = SolveStatus::Unbounded;
  } else {
    out.status = SolveStatus::NumericalFailure;
  }
  return out;
}

}  // namespace rlmpc::conic
