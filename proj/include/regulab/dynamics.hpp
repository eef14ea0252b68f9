#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "regulab/expr.hpp"

namespace regulab {

/// Compact set of initial conditions: a point or an axis-aligned box.
struct InitialSet {
  Eigen::VectorXd lo, hi;

  static InitialSet point(Eigen::VectorXd p);
  static InitialSet box(Eigen::VectorXd lo, Eigen::VectorXd hi);

  int dim() const { return static_cast<int>(lo.size()); }
  bool is_point() const { return lo == hi; }

  /// Deterministic sampling lattice: the box corners followed by the center
  /// (a single point for point sets). `max_points` truncates the corner
  /// enumeration for high-dimensional boxes.
  std::vector<Eigen::VectorXd> lattice(int max_points = 65) const;
};

/// Exosystem + plant + outputs, the object perturbations act on.
///
/// Variable conventions: s uses w1..w_{n_w}; f_p uses w, x, u; h_p and h_e
/// use w, x. When `error_in_output` is set the first n_e components of h_p
/// are the same expressions as h_e (the error is directly measured).
struct ExtendedPlant {
  int n_w = 0, n_p = 0, n_u = 0, n_y = 0, n_e = 0;
  std::vector<ExprPtr> s;
  std::vector<ExprPtr> f_p;
  std::vector<ExprPtr> h_p;
  std::vector<ExprPtr> h_e;
  bool error_in_output = false;

  void validate() const;

  /// All plant maps stacked as one expression system over (w, x, u); used by
  /// the weak C^k semimetric.
  std::vector<ExprPtr> stacked_maps() const;
  std::vector<std::string> stacked_variables() const;
};

/// Location of a linear internal-model block inside a regulator state.
struct InternalModelInfo {
  int offset = 0;  // first eta index within x_c
  int dim = 0;     // n_eta
  std::optional<double> period;
  std::vector<double> freqs;  // Hz, includes the 0 frequency when known
};

/// Output-feedback regulator. f_c / h_c are expressions in c1..c_{n_c} and
/// y1..y_{n_y}; e1..e_{n_e} may be used as aliases for the measured error
/// (substituted through h_e on composition).
struct Regulator {
  int n_c = 0;
  int n_u = 0;
  std::optional<int> declared_n_y;
  std::vector<ExprPtr> f_c;
  std::vector<ExprPtr> h_c;
  InitialSet X_c = InitialSet::point(Eigen::VectorXd());
  std::optional<InternalModelInfo> im;

  void validate() const;
  /// Largest y index referenced by f_c / h_c.
  int max_y_index() const;
};

/// Autonomous interconnection of plant and regulator. State ordering is
/// (w1..w_{n_w}, x1..x_{n_p}, c1..c_{n_c}); the field has no free u, y, e
/// variables.
struct ClosedLoopSystem {
  int n_w = 0, n_p = 0, n_c = 0, n_e = 0;
  std::vector<std::string> state_names;
  std::vector<ExprPtr> field;
  std::vector<ExprPtr> h_e;          // in (w, x)
  std::vector<ExprPtr> u_closed;     // substituted input, for printing
  std::optional<InternalModelInfo> im;  // offset rebased to the full state
  std::string plant_id, regulator_id;

  int dim() const { return n_w + n_p + n_c; }
  /// Error vector at a closed-loop state.
  Eigen::VectorXd error_at(const Eigen::VectorXd& state) const;
};

ClosedLoopSystem compose_closed_loop(const ExtendedPlant& plant, const Regulator& reg);

struct LinearizationBundle {
  Eigen::MatrixXd df_dx;   // n_p x n_p
  Eigen::MatrixXd df_du;   // n_p x n_u
  Eigen::MatrixXd dhe_dx;  // n_e x n_p
  Eigen::MatrixXd ds_dw;   // n_w x n_w
};

/// Jacobians at a point ordered (w, x, u); exact for polynomial/trig fields.
LinearizationBundle linearize_at(const ExtendedPlant& plant, const Eigen::VectorXd& point);

/// Linear extended plant: wdot = S w, xdot = A x + B u + P w,
/// y = C_y (w, x), e = C_e (w, x). C_e and C_y act on the stacked (w, x)
/// vector so tracking errors like x1 - w1 stay expressible.
struct LinearPlantSS {
  Eigen::MatrixXd S, A, B, P, C_e, C_y;

  int n_w() const { return static_cast<int>(S.rows()); }
  int n_p() const { return static_cast<int>(A.rows()); }
  int n_u() const { return static_cast<int>(B.cols()); }
  int n_e() const { return static_cast<int>(C_e.rows()); }
  int n_y() const { return static_cast<int>(C_y.rows()); }

  void validate() const;
  ExtendedPlant to_extended_plant() const;
};

/// Linear combination sum_j row(j) * var_names[j] built with folding
/// constructors (zero terms vanish).
ExprPtr linear_expr(const Eigen::RowVectorXd& row, const std::vector<std::string>& names,
                    double constant = 0.0);

std::vector<std::string> indexed_names(char family, int count);

}  // namespace regulab
