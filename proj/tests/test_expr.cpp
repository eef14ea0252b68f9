#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "regulab/common.hpp"
#include "regulab/expr.hpp"

using namespace regulab;

namespace {

constexpr double kPi = 3.14159265358979323846;

// Random expression trees for the property tests. `with_abs_div` controls
// whether abs / div nodes appear (they are excluded from the finite-difference
// check, where abs near zero and small denominators spoil the FD stencil).
ExprPtr random_ast(SplitMix64& rng, int depth, const std::vector<std::string>& vars,
                   bool with_abs_div) {
  const double leaf_p = depth <= 0 ? 1.0 : 0.35;
  if (rng.next_unit() < leaf_p) {
    if (rng.next_unit() < 0.4) return Expr::constant(std::round(rng.next_uniform(-4, 4) * 8) / 8);
    return Expr::variable(vars[rng.next_u64() % vars.size()]);
  }
  switch (rng.next_u64() % (with_abs_div ? 8u : 6u)) {
    case 0:
      return Expr::binary(BinaryOp::add, random_ast(rng, depth - 1, vars, with_abs_div),
                          random_ast(rng, depth - 1, vars, with_abs_div));
    case 1:
      return Expr::binary(BinaryOp::sub, random_ast(rng, depth - 1, vars, with_abs_div),
                          random_ast(rng, depth - 1, vars, with_abs_div));
    case 2:
      return Expr::binary(BinaryOp::mul, random_ast(rng, depth - 1, vars, with_abs_div),
                          random_ast(rng, depth - 1, vars, with_abs_div));
    case 3:
      return Expr::unary(rng.next_unit() < 0.5 ? UnaryOp::sin : UnaryOp::cos,
                         random_ast(rng, depth - 1, vars, with_abs_div));
    case 4:
      return Expr::unary(UnaryOp::tanh, random_ast(rng, depth - 1, vars, with_abs_div));
    case 5:
      return Expr::pow_int(random_ast(rng, depth - 1, vars, with_abs_div),
                           static_cast<int>(rng.next_u64() % 4));
    case 6:
      return Expr::unary(UnaryOp::abs_smooth, random_ast(rng, depth - 1, vars, with_abs_div));
    default:
      // denominator kept away from zero: 1.5 + (expr)^2
      return Expr::binary(
          BinaryOp::div, random_ast(rng, depth - 1, vars, with_abs_div),
          Expr::binary(BinaryOp::add, Expr::constant(1.5),
                       Expr::pow_int(random_ast(rng, depth - 1, vars, with_abs_div), 2)));
  }
}

VarBinding random_binding(SplitMix64& rng, const std::vector<std::string>& vars) {
  VarBinding b;
  for (const auto& v : vars) b[v] = rng.next_uniform(-1.5, 1.5);
  return b;
}

const std::vector<std::string> kVars = {"w1", "w2", "x1", "u1"};

}  // namespace

TEST_CASE("parse examples") {
  ExprPtr e = parse("w1 + u1");
  REQUIRE(e->kind == NodeKind::binary);
  CHECK(e->bop == BinaryOp::add);
  CHECK(e->lhs->kind == NodeKind::variable);
  CHECK(e->lhs->name == "w1");
  CHECK(e->rhs->name == "u1");

  CHECK(eval(parse("2*sin(w1)"), {{"w1", kPi / 2}}) == doctest::Approx(2.0).epsilon(1e-14));

  try {
    parse("sin(");
    FAIL("expected ParseError");
  } catch (const ParseError& err) {
    CHECK(err.offset == 4);
  }
}

TEST_CASE("parse errors") {
  CHECK_THROWS_AS(parse("foo(w1)"), ParseError);
  CHECK_THROWS_AS(parse("z1 + 1"), ParseError);
  CHECK_THROWS_AS(parse("w1 +"), ParseError);
  CHECK_THROWS_AS(parse("(w1"), ParseError);
  CHECK_THROWS_AS(parse("w1^x1"), ParseError);   // exponent must be an integer literal
  CHECK_THROWS_AS(parse("w1^-2"), ParseError);   // and non-negative
  CHECK_THROWS_AS(parse("w0"), ParseError);      // indices start at 1
  CHECK_THROWS_AS(parse(""), ParseError);
}

TEST_CASE("eval examples") {
  CHECK(eval(Expr::constant(7), {}) == 7.0);
  CHECK(eval(parse("x1*x1 - 1"), {{"x1", 3}}) == 8.0);
  CHECK_THROWS_AS(eval(parse("u1/x1"), {{"u1", 1}, {"x1", 0}}), EvalError);
  CHECK_THROWS_AS(eval(parse("w1"), {}), EvalError);  // unbound
}

TEST_CASE("precedence and associativity") {
  CHECK(eval(parse("2+3*4"), {}) == 14.0);
  CHECK(eval(parse("2*3^2"), {}) == 18.0);
  CHECK(eval(parse("-2^2"), {}) == -4.0);   // pow binds above unary minus
  CHECK(eval(parse("(0-2)^2"), {}) == 4.0);
  CHECK(eval(parse("8/4/2"), {}) == 1.0);   // left associative
  CHECK(eval(parse("8-4-2"), {}) == 2.0);
  CHECK(eval(parse("-x1*2"), {{"x1", 3}}) == -6.0);
}

TEST_CASE("differentiate examples") {
  CHECK(eval(differentiate(parse("x1*x1"), "x1"), {{"x1", 3}}) == 6.0);
  CHECK(eval(differentiate(parse("sin(w1)"), "w1"), {{"w1", 0}}) == 1.0);
  ExprPtr d = differentiate(parse("w1"), "u1");
  CHECK(eval(d, {{"w1", 123.0}, {"u1", -5.0}}) == 0.0);
  CHECK(eval(differentiate(parse("x1^3"), "x1"), {{"x1", 2}}) == 12.0);
  CHECK(eval(differentiate(parse("tanh(x1)"), "x1"), {{"x1", 0}}) == 1.0);
  // smooth abs: slope +-1 away from the corner
  CHECK(eval(differentiate(parse("abs(x1)"), "x1"), {{"x1", 2.0}}) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eval(differentiate(parse("abs(x1)"), "x1"), {{"x1", -2.0}}) ==
        doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("print/parse round-trip evaluates identically") {
  SplitMix64 rng(20260810);
  int done = 0, attempts = 0;
  while (done < 100 && attempts < 1000) {
    ++attempts;
    ExprPtr a = random_ast(rng, 5, kVars, true);
    ExprPtr b = parse(to_string(a));
    bool ok = true;
    for (int i = 0; i < 100; ++i) {
      VarBinding binding = random_binding(rng, kVars);
      double va, vb;
      try {
        va = eval(a, binding);
        vb = eval(b, binding);
      } catch (const EvalError&) {
        ok = false;
        break;
      }
      if (!std::isfinite(va)) {
        ok = false;
        break;
      }
      CHECK(va == vb);  // identical structure -> identical float ops
    }
    if (ok) ++done;
  }
  CHECK(done == 100);
}

TEST_CASE("parser output round-trips structurally") {
  for (const char* text :
       {"w1 + u1*x1", "-(w1 + u1)", "sin(w1)*cos(w2) - 2.5", "x1^3/(1.5 + w1^2)",
        "-w1^2", "abs(x1 - w1) + tanh(u1)", "1e-3*w1 + 0.25"}) {
    ExprPtr a = parse(text);
    CHECK(structurally_equal(a, parse(to_string(a))));
  }
}

TEST_CASE("derivative agrees with central finite differences") {
  SplitMix64 rng(777);
  const double h = 1e-5;
  int done = 0, attempts = 0;
  while (done < 100 && attempts < 2000) {
    ++attempts;
    ExprPtr f = random_ast(rng, 6, kVars, false);
    const std::string& v = kVars[rng.next_u64() % kVars.size()];
    ExprPtr df = differentiate(f, v);
    VarBinding b = random_binding(rng, kVars);
    double sym, fp, fm, f0;
    try {
      sym = eval(df, b);
      f0 = eval(f, b);
      VarBinding bp = b, bm = b;
      bp[v] += h;
      bm[v] -= h;
      fp = eval(f, bp);
      fm = eval(f, bm);
    } catch (const EvalError&) {
      continue;
    }
    if (!std::isfinite(sym) || !std::isfinite(fp) || !std::isfinite(fm)) continue;
    if (std::abs(f0) > 1e4 || std::abs(sym) > 1e4) continue;  // extreme curvature
    double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(sym - fd) <= 1e-6 * (1 + std::max(std::abs(sym), std::abs(f0))));
    ++done;
  }
  CHECK(done == 100);
}

TEST_CASE("eval is deterministic") {
  ExprPtr f = parse("sin(w1)*exp(x1) - tanh(u1)/(1.5 + w2^2)");
  VarBinding b = {{"w1", 0.3}, {"w2", -1.1}, {"x1", 0.7}, {"u1", 2.0}};
  double v1 = eval(f, b);
  double v2 = eval(f, b);
  CHECK(v1 == v2);
}

TEST_CASE("substitute replaces variables simultaneously") {
  ExprPtr f = parse("u1 + w1");
  ExprPtr g = substitute(f, {{"u1", parse("w1*w1")}, {"w1", parse("x1")}});
  // u1 -> w1*w1 must not be rewritten again by w1 -> x1
  CHECK(eval(g, {{"w1", 3}, {"x1", 10}}) == 19.0);
}

TEST_CASE("compiled system matches tree evaluation") {
  SplitMix64 rng(42);
  std::vector<ExprPtr> exprs;
  for (int i = 0; i < 6; ++i) exprs.push_back(random_ast(rng, 5, kVars, true));
  CompiledSystem cs(exprs, kVars);
  REQUIRE(cs.size() == 6);
  std::vector<double> in(kVars.size()), out(exprs.size());
  for (int trial = 0; trial < 50; ++trial) {
    VarBinding b = random_binding(rng, kVars);
    for (std::size_t j = 0; j < kVars.size(); ++j) in[j] = b[kVars[j]];
    bool threw = false;
    std::vector<double> expect(exprs.size());
    try {
      for (std::size_t j = 0; j < exprs.size(); ++j) expect[j] = eval(exprs[j], b);
    } catch (const EvalError&) {
      threw = true;
    }
    if (threw) continue;
    cs.eval(in, out);
    for (std::size_t j = 0; j < exprs.size(); ++j) CHECK(out[j] == expect[j]);
  }
}

TEST_CASE("free variables") {
  auto fv = free_variables(parse("sin(w1) + x1*u2 - t"));
  CHECK(fv == std::set<std::string>{"w1", "x1", "u2", "t"});
}
