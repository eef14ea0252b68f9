#include "regulab/dynamics.hpp"

#include <cmath>

#include "regulab/common.hpp"
#include "regulab/linalg.hpp"

namespace regulab {

namespace {

void check_variables(const std::vector<ExprPtr>& exprs, const std::set<std::string>& allowed,
                     const std::string& what) {
  for (const ExprPtr& e : exprs) {
    for (const std::string& v : free_variables(e)) {
      if (!allowed.count(v))
        throw ValidationError(what + " uses variable '" + v + "' outside its signature");
    }
  }
}

std::set<std::string> name_set(std::initializer_list<std::pair<char, int>> families) {
  std::set<std::string> out;
  for (auto [fam, count] : families)
    for (int i = 1; i <= count; ++i) out.insert(std::string(1, fam) + std::to_string(i));
  return out;
}

}  // namespace

std::vector<std::string> indexed_names(char family, int count) {
  std::vector<std::string> out;
  out.reserve(count);
  for (int i = 1; i <= count; ++i) out.push_back(std::string(1, family) + std::to_string(i));
  return out;
}

// ---------------------------------------------------------------------------
// InitialSet
// ---------------------------------------------------------------------------

InitialSet InitialSet::point(Eigen::VectorXd p) {
  InitialSet s;
  s.lo = p;
  s.hi = std::move(p);
  return s;
}

InitialSet InitialSet::box(Eigen::VectorXd lo, Eigen::VectorXd hi) {
  if (lo.size() != hi.size()) throw ValidationError("initial set: lo/hi dimension mismatch");
  for (Eigen::Index i = 0; i < lo.size(); ++i)
    if (lo(i) > hi(i)) throw ValidationError("initial set: lo > hi");
  InitialSet s;
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  return s;
}

std::vector<Eigen::VectorXd> InitialSet::lattice(int max_points) const {
  std::vector<Eigen::VectorXd> pts;
  if (is_point()) {
    pts.push_back(lo);
    return pts;
  }
  const int n = dim();
  std::vector<int> varying;
  for (int i = 0; i < n; ++i)
    if (lo(i) != hi(i)) varying.push_back(i);
  const int nv = static_cast<int>(varying.size());
  const long corners = 1L << nv;
  for (long mask = 0; mask < corners && static_cast<int>(pts.size()) < max_points - 1; ++mask) {
    Eigen::VectorXd p = lo;
    for (int j = 0; j < nv; ++j)
      if (mask & (1L << j)) p(varying[j]) = hi(varying[j]);
    pts.push_back(std::move(p));
  }
  pts.push_back(0.5 * (lo + hi));
  return pts;
}

// ---------------------------------------------------------------------------
// ExtendedPlant
// ---------------------------------------------------------------------------

void ExtendedPlant::validate() const {
  if (n_w < 0 || n_p < 0 || n_u < 0 || n_y < 0 || n_e < 0)
    throw ValidationError("plant dimensions must be non-negative");
  if (static_cast<int>(s.size()) != n_w) throw ValidationError("plant: |s| != n_w");
  if (static_cast<int>(f_p.size()) != n_p) throw ValidationError("plant: |f_p| != n_p");
  if (static_cast<int>(h_p.size()) != n_y) throw ValidationError("plant: |h_p| != n_y");
  if (static_cast<int>(h_e.size()) != n_e) throw ValidationError("plant: |h_e| != n_e");
  check_variables(s, name_set({{'w', n_w}}), "exosystem map s");
  check_variables(f_p, name_set({{'w', n_w}, {'x', n_p}, {'u', n_u}}), "plant map f_p");
  check_variables(h_p, name_set({{'w', n_w}, {'x', n_p}}), "output map h_p");
  check_variables(h_e, name_set({{'w', n_w}, {'x', n_p}}), "error map h_e");
  if (error_in_output) {
    if (n_y < n_e) throw ValidationError("error_in_output requires n_y >= n_e");
    for (int i = 0; i < n_e; ++i)
      if (!structurally_equal(h_p[i], h_e[i]))
        throw ValidationError("error_in_output: h_p[" + std::to_string(i) +
                              "] differs from h_e[" + std::to_string(i) + "]");
  }
}

std::vector<ExprPtr> ExtendedPlant::stacked_maps() const {
  std::vector<ExprPtr> out;
  out.insert(out.end(), s.begin(), s.end());
  out.insert(out.end(), f_p.begin(), f_p.end());
  out.insert(out.end(), h_p.begin(), h_p.end());
  return out;
}

std::vector<std::string> ExtendedPlant::stacked_variables() const {
  std::vector<std::string> vars = indexed_names('w', n_w);
  auto xs = indexed_names('x', n_p);
  auto us = indexed_names('u', n_u);
  vars.insert(vars.end(), xs.begin(), xs.end());
  vars.insert(vars.end(), us.begin(), us.end());
  return vars;
}

// ---------------------------------------------------------------------------
// Regulator
// ---------------------------------------------------------------------------

void Regulator::validate() const {
  if (n_c < 0 || n_u <= 0) throw ValidationError("regulator dimensions invalid");
  if (static_cast<int>(f_c.size()) != n_c) throw ValidationError("regulator: |f_c| != n_c");
  if (static_cast<int>(h_c.size()) != n_u) throw ValidationError("regulator: |h_c| != n_u");
  if (X_c.dim() != n_c) throw ValidationError("regulator: X_c dimension != n_c");
  for (const auto& exprs : {f_c, h_c}) {
    for (const ExprPtr& e : exprs) {
      for (const std::string& v : free_variables(e)) {
        char fam = v[0];
        if (fam != 'c' && fam != 'y' && fam != 'e')
          throw ValidationError("regulator map uses variable '" + v +
                                "' outside the (c, y, e) families");
        if (fam == 'c') {
          int idx = std::stoi(v.substr(1));
          if (idx > n_c) throw ValidationError("regulator references state '" + v + "' > n_c");
        }
      }
    }
  }
  if (im) {
    if (im->offset < 0 || im->dim < 0 || im->offset + im->dim > n_c)
      throw ValidationError("internal-model block out of regulator state range");
  }
}

int Regulator::max_y_index() const {
  int max_idx = 0;
  for (const auto& exprs : {f_c, h_c})
    for (const ExprPtr& e : exprs)
      for (const std::string& v : free_variables(e))
        if (v[0] == 'y') max_idx = std::max(max_idx, std::stoi(v.substr(1)));
  return max_idx;
}

// ---------------------------------------------------------------------------
// Closed-loop composition
// ---------------------------------------------------------------------------

ClosedLoopSystem compose_closed_loop(const ExtendedPlant& plant, const Regulator& reg) {
  plant.validate();
  reg.validate();
  if (reg.declared_n_y && *reg.declared_n_y != plant.n_y)
    throw ValidationError("dimension mismatch: regulator expects n_y = " +
                          std::to_string(*reg.declared_n_y) + ", plant has n_y = " +
                          std::to_string(plant.n_y));
  if (reg.max_y_index() > plant.n_y)
    throw ValidationError("dimension mismatch: regulator reads y" +
                          std::to_string(reg.max_y_index()) + " but plant has n_y = " +
                          std::to_string(plant.n_y));
  if (static_cast<int>(reg.h_c.size()) != plant.n_u)
    throw ValidationError("dimension mismatch: |h_c| != plant n_u");

  // y_i -> h_p_i(w, x), e_i -> h_e_i(w, x)
  std::map<std::string, ExprPtr> output_map;
  for (int i = 0; i < plant.n_y; ++i) output_map["y" + std::to_string(i + 1)] = plant.h_p[i];
  for (int i = 0; i < plant.n_e; ++i) output_map["e" + std::to_string(i + 1)] = plant.h_e[i];

  ClosedLoopSystem cl;
  cl.n_w = plant.n_w;
  cl.n_p = plant.n_p;
  cl.n_c = reg.n_c;
  cl.n_e = plant.n_e;
  cl.state_names = indexed_names('w', plant.n_w);
  for (const auto& n : indexed_names('x', plant.n_p)) cl.state_names.push_back(n);
  for (const auto& n : indexed_names('c', reg.n_c)) cl.state_names.push_back(n);

  std::map<std::string, ExprPtr> u_map;
  for (int i = 0; i < plant.n_u; ++i) {
    ExprPtr u_i = fold(substitute(reg.h_c[i], output_map));
    cl.u_closed.push_back(u_i);
    u_map["u" + std::to_string(i + 1)] = u_i;
  }

  for (const ExprPtr& e : plant.s) cl.field.push_back(fold(e));
  for (const ExprPtr& e : plant.f_p) cl.field.push_back(fold(substitute(e, u_map)));
  for (const ExprPtr& e : reg.f_c) cl.field.push_back(fold(substitute(e, output_map)));
  cl.h_e = plant.h_e;

  std::set<std::string> allowed(cl.state_names.begin(), cl.state_names.end());
  check_variables(cl.field, allowed, "closed-loop field");

  if (reg.im) {
    InternalModelInfo info = *reg.im;
    info.offset += plant.n_w + plant.n_p;
    cl.im = info;
  }
  return cl;
}

Eigen::VectorXd ClosedLoopSystem::error_at(const Eigen::VectorXd& state) const {
  VarBinding b;
  for (int i = 0; i < n_w + n_p; ++i) b[state_names[i]] = state(i);
  Eigen::VectorXd e(static_cast<Eigen::Index>(h_e.size()));
  for (std::size_t i = 0; i < h_e.size(); ++i) e(static_cast<Eigen::Index>(i)) = eval(h_e[i], b);
  return e;
}

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

LinearizationBundle linearize_at(const ExtendedPlant& plant, const Eigen::VectorXd& point) {
  plant.validate();
  if (point.size() != plant.n_w + plant.n_p + plant.n_u)
    throw ValidationError("linearize_at: point must have dimension n_w + n_p + n_u");
  VarBinding b;
  int k = 0;
  for (const auto& n : indexed_names('w', plant.n_w)) b[n] = point(k++);
  for (const auto& n : indexed_names('x', plant.n_p)) b[n] = point(k++);
  for (const auto& n : indexed_names('u', plant.n_u)) b[n] = point(k++);

  auto jac = [&](const std::vector<ExprPtr>& maps, char family, int cols) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(maps.size()), cols);
    for (std::size_t i = 0; i < maps.size(); ++i)
      for (int j = 0; j < cols; ++j)
        m(static_cast<Eigen::Index>(i), j) =
            eval(differentiate(maps[i], std::string(1, family) + std::to_string(j + 1)), b);
    return m;
  };

  LinearizationBundle out;
  out.df_dx = jac(plant.f_p, 'x', plant.n_p);
  out.df_du = jac(plant.f_p, 'u', plant.n_u);
  out.dhe_dx = jac(plant.h_e, 'x', plant.n_p);
  out.ds_dw = jac(plant.s, 'w', plant.n_w);
  return out;
}

// ---------------------------------------------------------------------------
// LinearPlantSS
// ---------------------------------------------------------------------------

void LinearPlantSS::validate() const {
  if (S.rows() != S.cols()) throw ValidationError("S must be square");
  if (A.rows() != A.cols()) throw ValidationError("A must be square");
  if (B.rows() != A.rows()) throw ValidationError("B rows != n_p");
  if (P.rows() != A.rows() || P.cols() != S.rows()) throw ValidationError("P must be n_p x n_w");
  const Eigen::Index nwx = S.rows() + A.rows();
  if (C_e.cols() != nwx) throw ValidationError("C_e must act on (w, x)");
  if (C_y.cols() != nwx) throw ValidationError("C_y must act on (w, x)");
  // marginal stability of the exosystem
  Eigen::VectorXcd eigs = balanced_eigenvalues(S);
  const double scale = std::max(1.0, S.norm());
  for (Eigen::Index i = 0; i < eigs.size(); ++i)
    if (std::abs(eigs(i).real()) > 1e-7 * scale)
      throw HypothesisError("exosystem-marginal-stability",
                            "S has an eigenvalue off the imaginary axis");
}

ExprPtr linear_expr(const Eigen::RowVectorXd& row, const std::vector<std::string>& names,
                    double constant) {
  using namespace build;
  ExprPtr acc = c(constant);
  for (Eigen::Index j = 0; j < row.size(); ++j)
    acc = add(acc, mul(c(row(j)), var(names[static_cast<std::size_t>(j)])));
  return acc;
}

ExtendedPlant LinearPlantSS::to_extended_plant() const {
  validate();
  ExtendedPlant p;
  p.n_w = n_w();
  p.n_p = n_p();
  p.n_u = n_u();
  p.n_y = n_y();
  p.n_e = n_e();

  auto w_names = indexed_names('w', p.n_w);
  auto x_names = indexed_names('x', p.n_p);
  auto u_names = indexed_names('u', p.n_u);
  std::vector<std::string> wx_names = w_names;
  wx_names.insert(wx_names.end(), x_names.begin(), x_names.end());

  for (int i = 0; i < p.n_w; ++i) p.s.push_back(linear_expr(S.row(i), w_names));
  for (int i = 0; i < p.n_p; ++i) {
    ExprPtr row = build::add(linear_expr(P.row(i), w_names), linear_expr(A.row(i), x_names));
    row = build::add(row, linear_expr(B.row(i), u_names));
    p.f_p.push_back(row);
  }
  for (int i = 0; i < p.n_e; ++i) p.h_e.push_back(linear_expr(C_e.row(i), wx_names));
  bool shared_error = p.n_y >= p.n_e;
  for (int i = 0; i < p.n_y && shared_error; ++i) {
    if (i < p.n_e && C_y.row(i) != C_e.row(i)) shared_error = false;
  }
  for (int i = 0; i < p.n_y; ++i) {
    if (shared_error && i < p.n_e)
      p.h_p.push_back(p.h_e[i]);  // shared trees keep Assumption 1 checkable
    else
      p.h_p.push_back(linear_expr(C_y.row(i), wx_names));
  }
  p.error_in_output = shared_error;
  p.validate();
  return p;
}

}  // namespace regulab
