#include "regulab/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <utility>

namespace regulab {

namespace {

double apply_unary(UnaryOp op, double v) {
  switch (op) {
    case UnaryOp::neg:
      return -v;
    case UnaryOp::sin:
      return std::sin(v);
    case UnaryOp::cos:
      return std::cos(v);
    case UnaryOp::exp:
      return std::exp(v);
    case UnaryOp::tanh:
      return std::tanh(v);
    case UnaryOp::abs_smooth:
      return std::sqrt(v * v + Expr::kAbsSmoothingSigma * Expr::kAbsSmoothingSigma);
  }
  return 0.0;
}

double apply_binary(BinaryOp op, double a, double b) {
  switch (op) {
    case BinaryOp::add:
      return a + b;
    case BinaryOp::sub:
      return a - b;
    case BinaryOp::mul:
      return a * b;
    case BinaryOp::div:
      if (b == 0.0) throw EvalError("division by zero");
      return a / b;
    case BinaryOp::pow: {
      // exponent is a validated non-negative integer literal
      int n = static_cast<int>(b);
      double r = 1.0;
      for (int i = 0; i < n; ++i) r *= a;
      return r;
    }
  }
  return 0.0;
}

bool is_integer_literal(const ExprPtr& e) {
  return e && e->kind == NodeKind::constant && e->value >= 0.0 &&
         e->value == std::floor(e->value) && e->value <= 1e9;
}

}  // namespace

ExprPtr Expr::constant(double v) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::constant;
  e->value = v;
  return e;
}

bool Expr::valid_variable_name(std::string_view name) {
  if (name == "t") return true;
  if (name.size() < 2) return false;
  char fam = name[0];
  if (fam != 'w' && fam != 'x' && fam != 'c' && fam != 'u' && fam != 'e' && fam != 'y')
    return false;
  if (name[1] == '0') return false;
  for (std::size_t i = 1; i < name.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(name[i]))) return false;
  return true;
}

ExprPtr Expr::variable(std::string name) {
  if (!valid_variable_name(name))
    throw ValidationError("unknown variable family: '" + name + "'");
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::variable;
  e->name = std::move(name);
  return e;
}

ExprPtr Expr::unary(UnaryOp op, ExprPtr child) {
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::unary;
  e->uop = op;
  e->lhs = std::move(child);
  return e;
}

ExprPtr Expr::binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs) {
  if (op == BinaryOp::pow && !is_integer_literal(rhs))
    throw ValidationError("pow exponent must be a non-negative integer literal");
  auto e = std::make_shared<Expr>();
  e->kind = NodeKind::binary;
  e->bop = op;
  e->lhs = std::move(lhs);
  e->rhs = std::move(rhs);
  return e;
}

ExprPtr Expr::pow_int(ExprPtr base, int exponent) {
  return binary(BinaryOp::pow, std::move(base), constant(exponent));
}

namespace build {

ExprPtr c(double v) { return Expr::constant(v); }
ExprPtr var(const std::string& name) { return Expr::variable(name); }

static bool is_const(const ExprPtr& e, double v) {
  return e->kind == NodeKind::constant && e->value == v;
}
static bool is_const(const ExprPtr& e) { return e->kind == NodeKind::constant; }

ExprPtr neg(ExprPtr a) {
  if (is_const(a)) return c(-a->value);
  return Expr::unary(UnaryOp::neg, std::move(a));
}

ExprPtr add(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0)) return b;
  if (is_const(b, 0)) return a;
  if (is_const(a) && is_const(b)) return c(a->value + b->value);
  return Expr::binary(BinaryOp::add, std::move(a), std::move(b));
}

ExprPtr sub(ExprPtr a, ExprPtr b) {
  if (is_const(b, 0)) return a;
  if (is_const(a) && is_const(b)) return c(a->value - b->value);
  if (is_const(a, 0)) return neg(std::move(b));
  return Expr::binary(BinaryOp::sub, std::move(a), std::move(b));
}

ExprPtr mul(ExprPtr a, ExprPtr b) {
  if (is_const(a, 0) || is_const(b, 0)) return c(0);
  if (is_const(a, 1)) return b;
  if (is_const(b, 1)) return a;
  if (is_const(a) && is_const(b)) return c(a->value * b->value);
  return Expr::binary(BinaryOp::mul, std::move(a), std::move(b));
}

ExprPtr div(ExprPtr a, ExprPtr b) {
  if (is_const(a) && is_const(b) && b->value != 0) return c(a->value / b->value);
  if (is_const(b, 1)) return a;
  return Expr::binary(BinaryOp::div, std::move(a), std::move(b));
}

ExprPtr pow_int(ExprPtr a, int n) {
  if (n == 0) return c(1);
  if (n == 1) return a;
  return Expr::pow_int(std::move(a), n);
}

ExprPtr sin(ExprPtr a) { return Expr::unary(UnaryOp::sin, std::move(a)); }
ExprPtr cos(ExprPtr a) { return Expr::unary(UnaryOp::cos, std::move(a)); }

}  // namespace build

// ---------------------------------------------------------------------------
// Parser: recursive descent over the raw bytes.
//
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := atom ['^' nonneg-int]
//   atom   := number | ident | ident '(' expr ')' | '(' expr ')'
// ---------------------------------------------------------------------------

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  ExprPtr run() {
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek_is(char c) {
    skip_ws();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  bool consume(char c) {
    if (peek_is(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    for (;;) {
      if (consume('+'))
        lhs = Expr::binary(BinaryOp::add, lhs, parse_term());
      else if (consume('-'))
        lhs = Expr::binary(BinaryOp::sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_unary();
    for (;;) {
      if (consume('*'))
        lhs = Expr::binary(BinaryOp::mul, lhs, parse_unary());
      else if (consume('/'))
        lhs = Expr::binary(BinaryOp::div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  ExprPtr parse_unary() {
    if (consume('-')) return Expr::unary(UnaryOp::neg, parse_unary());
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_atom();
    if (consume('^')) {
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      if (pos_ == start) fail("expected non-negative integer exponent after '^'");
      int exponent = 0;
      std::from_chars(text_.data() + start, text_.data() + pos_, exponent);
      return Expr::pow_int(base, exponent);
    }
    return base;
  }

  ExprPtr parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      ExprPtr inner = parse_expr();
      if (!consume(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  ExprPtr parse_number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double value = 0.0;
    auto [next, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) fail("malformed number");
    pos_ = static_cast<std::size_t>(next - text_.data());
    return Expr::constant(value);
  }

  ExprPtr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    std::string id(text_.substr(start, pos_ - start));
    if (peek_is('(')) {
      UnaryOp op;
      if (id == "sin")
        op = UnaryOp::sin;
      else if (id == "cos")
        op = UnaryOp::cos;
      else if (id == "exp")
        op = UnaryOp::exp;
      else if (id == "tanh")
        op = UnaryOp::tanh;
      else if (id == "abs")
        op = UnaryOp::abs_smooth;
      else {
        pos_ = start;
        fail("unknown function name '" + id + "'");
      }
      ++pos_;  // '('
      ExprPtr arg = parse_expr();
      if (!consume(')')) fail("expected ')'");
      return Expr::unary(op, arg);
    }
    if (!Expr::valid_variable_name(id)) {
      pos_ = start;
      fail("unknown variable family '" + id + "'");
    }
    return Expr::variable(id);
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprPtr parse(std::string_view text) { return Parser(text).run(); }

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace {

// precedence levels: add/sub 1, mul/div 2, unary minus 3, pow 4, atom 5
int level_of(const Expr& e) {
  switch (e.kind) {
    case NodeKind::constant:
      return e.value < 0 ? 3 : 5;  // negative constants print like unary minus
    case NodeKind::variable:
      return 5;
    case NodeKind::unary:
      return e.uop == UnaryOp::neg ? 3 : 5;  // named functions are atoms
    case NodeKind::binary:
      switch (e.bop) {
        case BinaryOp::add:
        case BinaryOp::sub:
          return 1;
        case BinaryOp::mul:
        case BinaryOp::div:
          return 2;
        case BinaryOp::pow:
          return 4;
      }
  }
  return 5;
}

std::string format_double(double v) {
  char buf[32];
  // shortest representation that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v) break;
  }
  return buf;
}

void print_node(const Expr& e, std::string& out);

void print_child(const Expr& child, int min_level, std::string& out) {
  if (level_of(child) < min_level) {
    out += '(';
    print_node(child, out);
    out += ')';
  } else {
    print_node(child, out);
  }
}

void print_node(const Expr& e, std::string& out) {
  switch (e.kind) {
    case NodeKind::constant:
      out += format_double(e.value);
      return;
    case NodeKind::variable:
      out += e.name;
      return;
    case NodeKind::unary:
      switch (e.uop) {
        case UnaryOp::neg:
          out += '-';
          print_child(*e.lhs, 3, out);
          return;
        case UnaryOp::sin:
          out += "sin(";
          break;
        case UnaryOp::cos:
          out += "cos(";
          break;
        case UnaryOp::exp:
          out += "exp(";
          break;
        case UnaryOp::tanh:
          out += "tanh(";
          break;
        case UnaryOp::abs_smooth:
          out += "abs(";
          break;
      }
      print_node(*e.lhs, out);
      out += ')';
      return;
    case NodeKind::binary:
      switch (e.bop) {
        case BinaryOp::add:
          print_child(*e.lhs, 1, out);
          out += " + ";
          print_child(*e.rhs, 2, out);  // a - b + c stays left-assoc on reparse
          return;
        case BinaryOp::sub:
          print_child(*e.lhs, 1, out);
          out += " - ";
          print_child(*e.rhs, 2, out);
          return;
        case BinaryOp::mul:
          print_child(*e.lhs, 2, out);
          out += "*";
          print_child(*e.rhs, 3, out);
          return;
        case BinaryOp::div:
          print_child(*e.lhs, 2, out);
          out += "/";
          print_child(*e.rhs, 3, out);
          return;
        case BinaryOp::pow:
          print_child(*e.lhs, 5, out);
          out += '^';
          out += format_double(e.rhs->value);
          return;
      }
  }
}

}  // namespace

std::string to_string(const ExprPtr& ast) {
  std::string out;
  print_node(*ast, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation, differentiation, substitution
// ---------------------------------------------------------------------------

double eval(const ExprPtr& ast, const VarBinding& binding) {
  const Expr& e = *ast;
  switch (e.kind) {
    case NodeKind::constant:
      return e.value;
    case NodeKind::variable: {
      auto it = binding.find(e.name);
      if (it == binding.end()) throw EvalError("unbound variable '" + e.name + "'");
      return it->second;
    }
    case NodeKind::unary:
      return apply_unary(e.uop, eval(e.lhs, binding));
    case NodeKind::binary:
      if (e.bop == BinaryOp::pow) return apply_binary(e.bop, eval(e.lhs, binding), e.rhs->value);
      return apply_binary(e.bop, eval(e.lhs, binding), eval(e.rhs, binding));
  }
  return 0.0;
}

ExprPtr differentiate(const ExprPtr& ast, const std::string& var) {
  using namespace build;
  const Expr& e = *ast;
  switch (e.kind) {
    case NodeKind::constant:
      return c(0);
    case NodeKind::variable:
      return c(e.name == var ? 1 : 0);
    case NodeKind::unary: {
      ExprPtr d = differentiate(e.lhs, var);
      switch (e.uop) {
        case UnaryOp::neg:
          return neg(d);
        case UnaryOp::sin:
          return mul(cos(e.lhs), d);
        case UnaryOp::cos:
          return neg(mul(sin(e.lhs), d));
        case UnaryOp::exp:
          return mul(Expr::unary(UnaryOp::exp, e.lhs), d);
        case UnaryOp::tanh:
          return mul(sub(c(1), pow_int(Expr::unary(UnaryOp::tanh, e.lhs), 2)), d);
        case UnaryOp::abs_smooth:
          // d/dz sqrt(z^2 + s^2) = z / sqrt(z^2 + s^2)
          return mul(div(e.lhs, Expr::unary(UnaryOp::abs_smooth, e.lhs)), d);
      }
      return c(0);
    }
    case NodeKind::binary: {
      switch (e.bop) {
        case BinaryOp::add:
          return add(differentiate(e.lhs, var), differentiate(e.rhs, var));
        case BinaryOp::sub:
          return sub(differentiate(e.lhs, var), differentiate(e.rhs, var));
        case BinaryOp::mul:
          return add(mul(differentiate(e.lhs, var), e.rhs),
                     mul(e.lhs, differentiate(e.rhs, var)));
        case BinaryOp::div:
          return div(sub(mul(differentiate(e.lhs, var), e.rhs),
                         mul(e.lhs, differentiate(e.rhs, var))),
                     mul(e.rhs, e.rhs));
        case BinaryOp::pow: {
          int n = static_cast<int>(e.rhs->value);
          if (n == 0) return c(0);
          return mul(mul(c(n), pow_int(e.lhs, n - 1)), differentiate(e.lhs, var));
        }
      }
    }
  }
  return build::c(0);
}

void collect_free_variables(const ExprPtr& ast, std::set<std::string>& out) {
  const Expr& e = *ast;
  switch (e.kind) {
    case NodeKind::constant:
      return;
    case NodeKind::variable:
      out.insert(e.name);
      return;
    case NodeKind::unary:
      collect_free_variables(e.lhs, out);
      return;
    case NodeKind::binary:
      collect_free_variables(e.lhs, out);
      collect_free_variables(e.rhs, out);
      return;
  }
}

std::set<std::string> free_variables(const ExprPtr& ast) {
  std::set<std::string> out;
  collect_free_variables(ast, out);
  return out;
}

bool structurally_equal(const ExprPtr& a, const ExprPtr& b) {
  if (a.get() == b.get()) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case NodeKind::constant:
      return a->value == b->value;
    case NodeKind::variable:
      return a->name == b->name;
    case NodeKind::unary:
      return a->uop == b->uop && structurally_equal(a->lhs, b->lhs);
    case NodeKind::binary:
      return a->bop == b->bop && structurally_equal(a->lhs, b->lhs) &&
             structurally_equal(a->rhs, b->rhs);
  }
  return false;
}

ExprPtr fold(const ExprPtr& ast) {
  const Expr& e = *ast;
  switch (e.kind) {
    case NodeKind::constant:
    case NodeKind::variable:
      return ast;
    case NodeKind::unary: {
      ExprPtr child = fold(e.lhs);
      if (e.uop == UnaryOp::neg) return build::neg(child);
      if (child->kind == NodeKind::constant)
        return Expr::constant(apply_unary(e.uop, child->value));
      return child == e.lhs ? ast : Expr::unary(e.uop, child);
    }
    case NodeKind::binary: {
      ExprPtr lhs = fold(e.lhs);
      ExprPtr rhs = fold(e.rhs);
      switch (e.bop) {
        case BinaryOp::add:
          return build::add(lhs, rhs);
        case BinaryOp::sub:
          return build::sub(lhs, rhs);
        case BinaryOp::mul:
          return build::mul(lhs, rhs);
        case BinaryOp::div:
          return build::div(lhs, rhs);
        case BinaryOp::pow:
          if (lhs->kind == NodeKind::constant)
            return Expr::constant(apply_binary(BinaryOp::pow, lhs->value, rhs->value));
          return build::pow_int(lhs, static_cast<int>(rhs->value));
      }
    }
  }
  return ast;
}

ExprPtr substitute(const ExprPtr& ast, const std::map<std::string, ExprPtr>& repl) {
  const Expr& e = *ast;
  switch (e.kind) {
    case NodeKind::constant:
      return ast;
    case NodeKind::variable: {
      auto it = repl.find(e.name);
      return it == repl.end() ? ast : it->second;
    }
    case NodeKind::unary: {
      ExprPtr child = substitute(e.lhs, repl);
      return child == e.lhs ? ast : Expr::unary(e.uop, child);
    }
    case NodeKind::binary: {
      ExprPtr lhs = substitute(e.lhs, repl);
      ExprPtr rhs = substitute(e.rhs, repl);
      return (lhs == e.lhs && rhs == e.rhs) ? ast : Expr::binary(e.bop, lhs, rhs);
    }
  }
  return ast;
}

// ---------------------------------------------------------------------------
// CompiledSystem
// ---------------------------------------------------------------------------

CompiledSystem::CompiledSystem(std::span<const ExprPtr> exprs,
                               std::span<const std::string> variables) {
  arity_ = variables.size();
  std::map<std::string, int> slots;
  for (std::size_t i = 0; i < variables.size(); ++i)
    slots[variables[i]] = static_cast<int>(i);
  int max_depth = 0;
  for (const ExprPtr& e : exprs) {
    int depth = 0;
    compile_node(*e, slots, depth, max_depth);
    component_end_.push_back(code_.size());
  }
  stack_.resize(static_cast<std::size_t>(max_depth) + 1);
}

void CompiledSystem::compile_node(const Expr& node, const std::map<std::string, int>& slots,
                                  int& depth, int& max_depth) {
  switch (node.kind) {
    case NodeKind::constant:
      code_.push_back({Instr::Op::push_const, 0, 0, node.value});
      ++depth;
      break;
    case NodeKind::variable: {
      auto it = slots.find(node.name);
      if (it == slots.end())
        throw ValidationError("variable '" + node.name + "' not in the system's variable list");
      code_.push_back({Instr::Op::push_var, 0, it->second, 0.0});
      ++depth;
      break;
    }
    case NodeKind::unary:
      compile_node(*node.lhs, slots, depth, max_depth);
      code_.push_back({Instr::Op::unary, static_cast<unsigned char>(node.uop), 0, 0.0});
      break;
    case NodeKind::binary:
      if (node.bop == BinaryOp::pow) {
        compile_node(*node.lhs, slots, depth, max_depth);
        code_.push_back({Instr::Op::binary, static_cast<unsigned char>(BinaryOp::pow), 0,
                         node.rhs->value});
        break;
      }
      compile_node(*node.lhs, slots, depth, max_depth);
      compile_node(*node.rhs, slots, depth, max_depth);
      code_.push_back({Instr::Op::binary, static_cast<unsigned char>(node.bop), 0, 0.0});
      --depth;
      break;
  }
  if (depth > max_depth) max_depth = depth;
}

void CompiledSystem::eval(std::span<const double> vars, std::span<double> out) {
  if (vars.size() != arity_) throw ValidationError("CompiledSystem: wrong input dimension");
  std::size_t begin = 0;
  double* sp = stack_.data();
  for (std::size_t comp = 0; comp < component_end_.size(); ++comp) {
    double* top = sp;
    for (std::size_t i = begin; i < component_end_[comp]; ++i) {
      const Instr& in = code_[i];
      switch (in.op) {
        case Instr::Op::push_const:
          *top++ = in.value;
          break;
        case Instr::Op::push_var:
          *top++ = vars[static_cast<std::size_t>(in.index)];
          break;
        case Instr::Op::unary:
          top[-1] = apply_unary(static_cast<UnaryOp>(in.fn), top[-1]);
          break;
        case Instr::Op::binary:
          if (static_cast<BinaryOp>(in.fn) == BinaryOp::pow) {
            top[-1] = apply_binary(BinaryOp::pow, top[-1], in.value);
          } else {
            top[-2] = apply_binary(static_cast<BinaryOp>(in.fn), top[-2], top[-1]);
            --top;
          }
          break;
      }
    }
    out[comp] = top[-1];
    begin = component_end_[comp];
  }
}

double CompiledSystem::eval_component(int i, std::span<const double> vars) {
  std::vector<double> out(component_end_.size());
  eval(vars, out);
  return out[static_cast<std::size_t>(i)];
}

}  // namespace regulab
