#pragma once

#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "regulab/common.hpp"

namespace regulab {

enum class NodeKind { constant, variable, unary, binary };
enum class UnaryOp { neg, sin, cos, exp, tanh, abs_smooth };
enum class BinaryOp { add, sub, mul, div, pow };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

/// Binding of variable names to values for evaluation.
using VarBinding = std::map<std::string, double>;

/// Immutable expression tree over the reserved variable families
/// w*, x*, c*, u*, e*, y* and t. Nodes are shared; trees are safe to share
/// across threads once built.
///
/// `abs` is the smooth surrogate sqrt(z^2 + sigma^2) with fixed sigma = 1e-9,
/// so every expression stays differentiable.
class Expr {
 public:
  static constexpr double kAbsSmoothingSigma = 1e-9;

  NodeKind kind;
  double value = 0.0;     // constant
  std::string name;       // variable
  UnaryOp uop{};          // unary
  BinaryOp bop{};         // binary
  ExprPtr lhs, rhs;       // children; unary uses lhs only

  // Raw constructors. `pow` requires rhs to be a non-negative integer literal.
  static ExprPtr constant(double v);
  static ExprPtr variable(std::string name);
  static ExprPtr unary(UnaryOp op, ExprPtr child);
  static ExprPtr binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs);
  static ExprPtr pow_int(ExprPtr base, int exponent);

  /// True iff `name` is in a reserved family (w1.., x1.., c1.., u1.., e1..,
  /// y1..) or is "t".
  static bool valid_variable_name(std::string_view name);
};

/// Lightly folding constructors used when building expressions
/// programmatically (derivatives, substitutions, synthesized regulators).
/// They collapse constant subtrees and the 0/1 identities so generated trees
/// stay readable; they never change the value of the expression.
namespace build {
ExprPtr c(double v);
ExprPtr var(const std::string& name);
ExprPtr neg(ExprPtr a);
ExprPtr add(ExprPtr a, ExprPtr b);
ExprPtr sub(ExprPtr a, ExprPtr b);
ExprPtr mul(ExprPtr a, ExprPtr b);
ExprPtr div(ExprPtr a, ExprPtr b);
ExprPtr pow_int(ExprPtr a, int n);
ExprPtr sin(ExprPtr a);
ExprPtr cos(ExprPtr a);
}  // namespace build

/// Parses infix expression text. Precedence: ^ above unary minus above */
/// above +-. Functions: sin, cos, exp, tanh, abs. Throws ParseError with a
/// byte offset on malformed input, unknown functions, or variables outside
/// the reserved families.
ExprPtr parse(std::string_view text);

/// Prints with minimal parentheses; parse(to_string(a)) is structurally
/// identical to `a` for parser-produced trees.
std::string to_string(const ExprPtr& ast);

/// Evaluates with all free variables bound. Throws EvalError on unbound
/// variables or division by zero.
double eval(const ExprPtr& ast, const VarBinding& binding);

/// Exact symbolic derivative with respect to `var`.
ExprPtr differentiate(const ExprPtr& ast, const std::string& var);

/// Free variables of the tree.
std::set<std::string> free_variables(const ExprPtr& ast);

void collect_free_variables(const ExprPtr& ast, std::set<std::string>& out);

/// Structural equality (same shape, ops, names and constants bit-for-bit).
bool structurally_equal(const ExprPtr& a, const ExprPtr& b);

/// Replaces every occurrence of the named variables by the paired
/// expressions (simultaneous substitution).
ExprPtr substitute(const ExprPtr& ast, const std::map<std::string, ExprPtr>& repl);

/// Rebuilds the tree through the folding constructors, collapsing constant
/// subtrees and 0/1 identities. Applied to composed closed-loop fields.
ExprPtr fold(const ExprPtr& ast);

/// A system of expressions flattened to stack programs over a fixed variable
/// ordering; the fast path used by the integrator and grid evaluations.
/// Instances carry scratch space: create one per thread.
class CompiledSystem {
 public:
  CompiledSystem() = default;
  CompiledSystem(std::span<const ExprPtr> exprs, std::span<const std::string> variables);

  int size() const { return static_cast<int>(component_end_.size()); }
  int arity() const { return static_cast<int>(arity_); }

  /// Evaluates all components at `vars` (ordered as in the constructor) into
  /// `out` (size() entries). Throws EvalError on division by zero.
  void eval(std::span<const double> vars, std::span<double> out);

  /// Convenience for a single component.
  double eval_component(int i, std::span<const double> vars);

 private:
  struct Instr {
    enum class Op : unsigned char { push_const, push_var, unary, binary };
    Op op;
    unsigned char fn;  // UnaryOp or BinaryOp
    int index = 0;     // variable slot
    double value = 0;  // constant
  };
  void compile_node(const Expr& node, const std::map<std::string, int>& slots,
                    int& depth, int& max_depth);

  std::vector<Instr> code_;
  std::vector<std::size_t> component_end_;  // one past last instr per component
  std::size_t arity_ = 0;
  std::vector<double> stack_;
};

}  // namespace regulab
