#include "rlmpc/conic.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rlmpc::conic {

LinExpr LinExpr::term(int index, double coeff) {
  LinExpr e;
  e.add_term(index, coeff);
  return e;
}

void LinExpr::add_term(int index, double coeff) {
  if (coeff != 0.0) terms_.emplace_back(index, coeff);
}

double LinExpr::evaluate(const Eigen::VectorXd& z) const {
  double v = constant_;
  for (const auto& [i, c] : terms_) v += c * z[i];
  return v;
}

LinExpr& LinExpr::operator+=(const LinExpr& other) {
  terms_.insert(terms_.end(), other.terms_.begin(), other.terms_.end());
  constant_ += other.constant_;
  return *this;
}

LinExpr& LinExpr::operator-=(const LinExpr& other) {
  terms_.reserve(terms_.size() + other.terms_.size());
  for (const auto& [i, c] : other.terms_) terms_.emplace_back(i, -c);
  constant_ -= other.constant_;
  return *this;
}

LinExpr& LinExpr::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
  } else {
    for (auto& t : terms_) t.second *= s;
  }
  constant_ *= s;
  return *this;
}

LinExprVec as_exprs(const Variable& v) {
  LinExprVec out;
  out.reserve(v.size);
  for (int i = 0; i < v.size; ++i) out.push_back(LinExpr::term(v[i]));
  return out;
}

LinExprVec constant_exprs(const Eigen::VectorXd& c) {
  return LinExprVec(c.data(), c.data() + c.size());
}

LinExprVec operator*(const Eigen::MatrixXd& M, const LinExprVec& x) {
  if (M.cols() != static_cast<Eigen::Index>(x.size()))
    throw std::invalid_argument("matrix-expression product: dimension mismatch");
  LinExprVec out(M.rows());
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c)
      if (M(r, c) != 0.0) out[r] += M(r, c) * x[c];
  return out;
}

LinExprVec operator+(const LinExprVec& a, const LinExprVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("expression sum: dimension mismatch");
  LinExprVec out = a;
  for (size_t i = 0; i < a.size(); ++i) out[i] += b[i];
  return out;
}

LinExprVec operator-(const LinExprVec& a, const LinExprVec& b) {
  if (a.size() != b.size()) throw std::invalid_argument("expression difference: dimension mismatch");
  LinExprVec out = a;
  for (size_t i = 0; i < a.size(); ++i) out[i] -= b[i];
  return out;
}

LinExprVec operator+(const LinExprVec& a, const Eigen::VectorXd& b) {
  if (static_cast<Eigen::Index>(a.size()) != b.size())
    throw std::invalid_argument("expression sum: dimension mismatch");
  LinExprVec out = a;
  for (size_t i = 0; i < a.size(); ++i) out[i].add_constant(b[i]);
  return out;
}

LinExprVec operator-(const LinExprVec& a, const Eigen::VectorXd& b) { return a + (-b); }

LinExprVec operator*(double s, const LinExprVec& a) {
  LinExprVec out = a;
  for (auto& e : out) e *= s;
  return out;
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::Unbounded: return "Unbounded";
    case SolveStatus::NumericalFailure: return "NumericalFailure";
  }
  return "?";
}

Eigen::VectorXd SolveResult::value(const Variable& v) const {
  if (!optimal()) throw std::logic_error("primal values requested from a non-optimal result");
  return primal.segment(v.offset, v.size);
}

Eigen::VectorXd SolveResult::value(const LinExprVec& e) const {
  Eigen::VectorXd out(e.size());
  for (size_t i = 0; i < e.size(); ++i) out[i] = e[i].evaluate(primal);
  return out;
}

Variable ConvexProgram::add_variable(const std::string& name, int size) {
  if (size < 0) throw std::invalid_argument("negative variable size");
  Variable v{num_vars_, size};
  num_vars_ += size;
  vars_.emplace_back(name, v);
  return v;
}

void ConvexProgram::check(const LinExpr& e) const {
  for (const auto& [i, c] : e.terms()) {
    if (i < 0 || i >= num_vars_) throw std::out_of_range("expression references an undeclared variable");
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite coefficient");
  }
  if (!std::isfinite(e.constant())) throw std::invalid_argument("non-finite constant");
}

void ConvexProgram::add_objective(const LinExpr& e) {
  check(e);
  objective_ += e;
}

void ConvexProgram::add_squared_norm_objective(const LinExprVec& residual, double weight) {
  if (!(weight > 0.0)) throw std::invalid_argument("quadratic weight must be positive");
  for (const auto& e : residual) check(e);
  quads_.push_back({residual, weight});
}

void ConvexProgram::add_equality(const LinExpr& e) {
  check(e);
  eqs_.push_back(e);
}

void ConvexProgram::add_equalities(const LinExprVec& es) {
  for (const auto& e : es) add_equality(e);
}

void ConvexProgram::add_less_equal(const LinExpr& e) {
  check(e);
  ineqs_.push_back(e);
}

void ConvexProgram::add_less_equal(const LinExprVec& es) {
  for (const auto& e : es) add_less_equal(e);
}

void ConvexProgram::add_nonnegative(const Variable& v) {
  for (int i = 0; i < v.size; ++i) add_less_equal(LinExpr::term(v[i], -1.0));
}

void ConvexProgram::add_second_order_cone(const LinExprVec& body, const LinExpr& bound) {
  for (const auto& e : body) check(e);
  check(bound);
  socs_.push_back({body, bound});
}

double ConvexProgram::objective_value(const Eigen::VectorXd& z) const {
  double v = objective_.evaluate(z);
  for (const auto& q : quads_) {
    double s = 0.0;
    for (const auto& e : q.residual) s += std::pow(e.evaluate(z), 2);
    v += q.weight * s;
  }
  return v;
}

double ConvexProgram::max_violation(const Eigen::VectorXd& z) const {
  double worst = 0.0;
  for (const auto& e : eqs_) worst = std::max(worst, std::abs(e.evaluate(z)));
  for (const auto& e : ineqs_) worst = std::max(worst, e.evaluate(z));
  for (const auto& c : socs_) {
    double s = 0.0;
    for (const auto& e : c.body) s += std::pow(e.evaluate(z), 2);
    worst = std::max(worst, std::sqrt(s) - c.bound.evaluate(z));
  }
  return worst;
}

namespace {

void write_expr(std::ostream& os, const LinExpr& e) {
  bool first = true;
  for (const auto& [i, c] : e.terms()) {
    os << (first ? "" : " ") << (c < 0 ? "- " : (first ? "" : "+ ")) << std::abs(c) << " z" << i;
    first = false;
  }
  if (e.constant() != 0.0 || first)
    os << (first ? "" : " ") << (e.constant() < 0 ? "- " : (first ? "" : "+ ")) << std::abs(e.constant());
}

ConicForm to_conic_form(const ConvexProgram& prog) {
  ConicForm f;
  const int nq = static_cast<int>(prog.quadratics().size());
  f.n = prog.num_variables() + nq;
  f.c = Eigen::VectorXd::Zero(f.n);
  for (const auto& [i, c] : prog.linear_objective().terms()) f.c[i] += c;

  f.p = prog.num_equalities();
  f.b.resize(f.p);
  for (int r = 0; r < f.p; ++r) {
    const auto& e = prog.equalities()[r];
    for (const auto& [i, c] : e.terms()) f.A.emplace_back(r, i, c);
    f.b[r] = -e.constant();
  }

  int rows = prog.num_inequalities();
  for (const auto& c : prog.cones()) rows += static_cast<int>(c.body.size()) + 1;
  for (const auto& q : prog.quadratics()) rows += static_cast<int>(q.residual.size()) + 2;
  f.m = rows;
  f.h.resize(rows);
  f.num_lp = prog.num_inequalities();

  int r = 0;
  for (const auto& e : prog.inequalities()) {
    for (const auto& [i, c] : e.terms()) f.G.emplace_back(r, i, c);
    f.h[r++] = -e.constant();
  }
  // cone row s = e  ->  G = -a, h = const
  auto cone_row = [&](const LinExpr& e, double scale) {
    for (const auto& [i, c] : e.terms()) f.G.emplace_back(r, i, -scale * c);
    f.h[r++] = scale * e.constant();
  };
  for (const auto& c : prog.cones()) {
    f.soc_dims.push_back(static_cast<int>(c.body.size()) + 1);
    cone_row(c.bound, 1.0);
    for (const auto& e : c.body) cone_row(e, 1.0);
  }
  // weight*||r||^2 -> weight*t with ||(2r, t-1)|| <= t+1
  for (int k = 0; k < nq; ++k) {
    const auto& q = prog.quadratics()[k];
    const int t = prog.num_variables() + k;
    f.c[t] = q.weight;
    f.soc_dims.push_back(static_cast<int>(q.residual.size()) + 2);
    LinExpr top = LinExpr::term(t) + 1.0;
    cone_row(top, 1.0);
    for (const auto& e : q.residual) cone_row(e, 2.0);
    cone_row(LinExpr::term(t) - 1.0, 1.0);
  }
  return f;
}

}  // namespace

std::string ConvexProgram::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "variables " << num_vars_ << "\n";
  for (const auto& [name, v] : vars_) os << "  " << name << " [" << v.offset << ", " << v.offset + v.size << ")\n";
  os << "minimize ";
  write_expr(os, objective_);
  os << "\n";
  for (const auto& q : quads_) {
    os << "  + " << q.weight << " * || ";
    for (const auto& e : q.residual) {
      os << "(";
      write_expr(os, e);
      os << ") ";
    }
    os << "||^2\n";
  }
  os << "subject to\n";
  for (const auto& e : eqs_) {
    os << "  eq: ";
    write_expr(os, e);
    os << " == 0\n";
  }
  for (const auto& e : ineqs_) {
    os << "  le: ";
    write_expr(os, e);
    os << " <= 0\n";
  }
  for (const auto& c : socs_) {
    os << "  soc: || ";
    for (const auto& e : c.body) {
      os << "(";
      write_expr(os, e);
      os << ") ";
    }
    os << "|| <= ";
    write_expr(os, c.bound);
    os << "\n";
  }
  return os.str();
}

SolveResult solve(const ConvexProgram& prog, const SolverSettings& settings) {
  const auto start = std::chrono::steady_clock::now();
  const ConicForm form = to_conic_form(prog);

  Backend backend = settings.backend;
  if (backend == Backend::Automatic)
    backend = (prog.is_lp() && simplex_row_count(form) <= settings.simplex_max_rows) ? Backend::Simplex
                                                                                      : Backend::InteriorPoint;
  if (backend == Backend::Simplex && !prog.is_lp())
    throw std::invalid_argument("simplex backend requires a linear program");

  BackendResult br = backend == Backend::Simplex ? solve_simplex(form, settings)
                                                 : solve_interior_point(form, settings);
  if (backend == Backend::Simplex && br.status == SolveStatus::NumericalFailure) {
    // a near-singular basis; the interior point does not depend on one
    backend = Backend::InteriorPoint;
    br = solve_interior_point(form, settings);
  }

  SolveResult res;
  res.status = br.status;
  res.iterations = br.iterations;
  res.backend_used = backend;
  if (br.status == SolveStatus::Optimal) {
    res.primal = br.x.head(prog.num_variables());
    res.objective = prog.objective_value(res.primal);
  }
  res.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

}  // namespace rlmpc::conic
