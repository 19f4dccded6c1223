#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hysmc/compiled_expr.hpp"
#include "hysmc/dsl.hpp"
#include "hysmc/expr.hpp"
#include "support/model_gen.hpp"

using namespace hysmc;

namespace {

Expr parse_with_clock(const std::string& text, const std::string& clock = "t") {
  ExpressionOptions o;
  o.clock_name = clock;
  return parse_expression(text, o);
}

}  // namespace

TEST(Expr, ParsesFatigueIncrement) {
  Expr e = parse_with_clock("1 - exp(-lambda_f*t)");
  Expr expected = Expr::binary(
      BinaryOp::Sub, Expr::constant(1),
      Expr::unary(UnaryOp::Exp,
                  Expr::unary(UnaryOp::Negate,
                              Expr::binary(BinaryOp::Mul, Expr::variable("lambda_f"),
                                           Expr::clock("t")))));
  EXPECT_EQ(e, expected);
}

TEST(Expr, ParsesComparison) {
  EXPECT_EQ(parse_expression("V >= v_max"),
            Expr::binary(BinaryOp::Ge, Expr::variable("V"), Expr::variable("v_max")));
}

TEST(Expr, SyntaxErrorPointsAtStar) {
  try {
    parse_expression("1 + * 2");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.pos().line, 1);
    EXPECT_EQ(e.pos().column, 5);
    EXPECT_FALSE(e.expected().empty());
  }
}

TEST(Expr, Precedence) {
  // or < and < comparison < additive < multiplicative
  Expr e = parse_expression("a || b && c < d + e * f");
  Expr expected = Expr::variable("a") ||
                  (Expr::variable("b") &&
                   (Expr::variable("c") <
                    Expr::variable("d") + Expr::variable("e") * Expr::variable("f")));
  EXPECT_EQ(e, expected);
  EXPECT_EQ(parse_expression("a - b - c"),
            (Expr::variable("a") - Expr::variable("b")) - Expr::variable("c"));
  EXPECT_EQ(parse_expression("a / b * c"),
            (Expr::variable("a") / Expr::variable("b")) * Expr::variable("c"));
  EXPECT_EQ(parse_expression("  a\n*\tb "), Expr::variable("a") * Expr::variable("b"));
}

TEST(Expr, ComparisonsDoNotChain) {
  EXPECT_THROW(parse_expression("a < b < c"), ParseError);
}

TEST(Expr, EvaluatesFatigueAt900) {
  // 1 - e^-4.5 = 0.98889100346175773...
  double v = evaluate_number(parse_expression("1 - exp(-0.005*900)"), Environment{});
  EXPECT_NEAR(v, 0.98889100346175773, 1e-6);
  EXPECT_NEAR(v, 0.9888910, 1e-6);
}

TEST(Expr, EvaluatesSimpleExamples) {
  EXPECT_EQ(evaluate_number(parse_expression("exp(0)"), {}), 1.0);
  EXPECT_DOUBLE_EQ(evaluate_number(parse_expression("0.005*exp(-0.005*0)"), {}), 0.005);
}

TEST(Expr, EvaluationErrors) {
  EXPECT_THROW(evaluate(parse_expression("x + 1"), {}), EvalError);
  EXPECT_THROW(evaluate(parse_expression("1 / 0"), {}), EvalError);
  EXPECT_THROW(evaluate(parse_expression("1 + (2 < 3)"), {}), EvalError);
  EXPECT_THROW(evaluate(parse_expression("true && 1"), {}), EvalError);
  EXPECT_THROW(evaluate(parse_with_clock("t * 2"), {}), EvalError);
  Environment env;
  env.bind("x", 2).set_local_clock(3);
  EXPECT_EQ(evaluate_number(parse_with_clock("x * t"), env), 6.0);
}

TEST(Expr, TypeCheck) {
  EXPECT_EQ(check_type(parse_expression("a + b")), ExprType::Number);
  EXPECT_EQ(check_type(parse_expression("a <= b && true")), ExprType::Boolean);
  EXPECT_THROW(check_type(parse_expression("(a <= b) + 1")), EvalError);
  EXPECT_THROW(check_type(parse_expression("exp(a < b)")), EvalError);
  EXPECT_THROW(check_type(parse_expression("-true")), EvalError);
}

TEST(Expr, LocationAtomsOnlyWhenAllowed) {
  EXPECT_THROW(parse_expression("Human.passed_out"), ParseError);
  ExpressionOptions o;
  o.allow_location_atoms = true;
  Expr e = parse_expression("Human.passed_out && (Robot.starting || Robot.moving)", o);
  EXPECT_TRUE(contains_location_atom(e));
  Environment env;
  env.set_location("Human", "passed_out").set_location("Robot", "moving");
  EXPECT_TRUE(evaluate_bool(e, env));
  env.set_location("Robot", "idle");
  EXPECT_FALSE(evaluate_bool(e, env));
}

TEST(Expr, Queries) {
  Expr e = parse_with_clock("a * exp(-b * t) <= c");
  std::set<std::string> vars;
  collect_variables(e, vars);
  EXPECT_EQ(vars, (std::set<std::string>{"a", "b", "c"}));
  EXPECT_TRUE(references_clock(e));
  EXPECT_FALSE(contains_strict_comparison(e));
  EXPECT_TRUE(contains_strict_comparison(parse_expression("a < b")));
}

TEST(Expr, ConstantsAreCanonical) {
  EXPECT_EQ(Expr::constant(-2.5), Expr::unary(UnaryOp::Negate, Expr::constant(2.5)));
  EXPECT_EQ(to_string(Expr::constant(-0.0)), "0");
  EXPECT_THROW(Expr::constant(std::numeric_limits<double>::infinity()), Error);
  EXPECT_THROW(Expr::constant(std::nan("")), Error);
}

TEST(Expr, PrintParseRoundTripGenerated) {
  testgen::Gen g(12345);
  testgen::Scope scope{{"x", "y_1", "80_to_20"}, "t"};
  ExpressionOptions o;
  o.clock_name = "t";
  for (int i = 0; i < 3000; ++i) {
    Expr e = g.coin() ? testgen::numeric(g, scope, 5) : testgen::boolean(g, scope, 4);
    std::string text = to_string(e);
    Expr back = parse_expression(text, o);
    ASSERT_EQ(back, e) << text;
    ASSERT_EQ(to_string(back), text);
  }
}

TEST(Expr, ExpIsFiniteOnBoundedInputs) {
  for (double x = -700; x <= 700; x += 0.5) {
    Environment env;
    env.bind("x", x);
    double v = evaluate_number(parse_expression("exp(x)"), env);
    ASSERT_TRUE(std::isfinite(v)) << x;
  }
}

TEST(Expr, NoNanWithoutDivision) {
  testgen::Gen g(777);
  testgen::Scope scope{{"x", "y"}, ""};
  for (int i = 0; i < 2000; ++i) {
    Expr e = testgen::numeric(g, scope, 3);
    std::string text = to_string(e);
    if (text.find('/') != std::string::npos) continue;
    Environment env;
    env.bind("x", g.real(-10, 10)).bind("y", g.real(-10, 10));
    double v = evaluate_number(e, env);
    ASSERT_FALSE(std::isnan(v)) << text;
  }
}

TEST(CompiledExpr, AgreesWithTreeEvaluator) {
  testgen::Gen g(99);
  NetworkModel m;
  m.variables = {{"x", 0, VarDecl::Kind::Variable, "", {}},
                 {"y", 0, VarDecl::Kind::Variable, "", {}},
                 {"k", 3, VarDecl::Kind::Constant, "", {}}};
  HybridAutomaton a;
  a.name = "A";
  a.local_clock = "t";
  a.locations = {Location{"p", {}, std::nullopt, {}, {}}, Location{"q", {}, std::nullopt, {}, {}}};
  a.initial_location = "p";
  m.automata = {a};
  SlotLayout layout = SlotLayout::of(m);
  testgen::Scope scope{{"x", "y", "k"}, "t"};
  int compared = 0;
  for (int i = 0; i < 3000; ++i) {
    Expr e = g.coin() ? testgen::numeric(g, scope, 4) : testgen::boolean(g, scope, 3);
    double x = g.real(-5, 5), y = g.real(-5, 5), t = g.real(0, 10);
    Environment env;
    env.bind("x", x).bind("y", y).bind("k", 3).set_local_clock(t);
    std::vector<double> slots = {x, y, 3, t};
    std::vector<int> locs = {0};
    CompiledExpr c = compile(e, layout, 0);
    Value tree;
    try {
      tree = evaluate(e, env);
    } catch (const EvalError&) {
      EXPECT_THROW(c.eval(slots, locs), EvalError) << to_string(e);
      continue;
    }
    double fast = c.eval(slots, locs);
    if (const double* d = std::get_if<double>(&tree)) {
      if (std::isnan(*d)) {
        EXPECT_TRUE(std::isnan(fast));
      } else {
        EXPECT_EQ(fast, *d) << to_string(e);
      }
    } else {
      EXPECT_EQ(fast != 0.0, std::get<bool>(tree)) << to_string(e);
    }
    ++compared;
  }
  EXPECT_GT(compared, 2000);
}

TEST(CompiledExpr, ResolvesLocationsAndRejectsUnknowns) {
  NetworkModel m;
  HybridAutomaton a;
  a.name = "Robot";
  a.locations = {Location{"idle", {}, std::nullopt, {}, {}},
                 Location{"moving", {}, std::nullopt, {}, {}}};
  a.initial_location = "idle";
  m.automata = {a};
  SlotLayout layout = SlotLayout::of(m);
  ExpressionOptions o;
  o.allow_location_atoms = true;
  CompiledExpr c = compile(parse_expression("Robot.moving", o), layout);
  std::vector<double> slots = {0.0};
  EXPECT_FALSE(c.test(slots, std::vector<int>{0}));
  EXPECT_TRUE(c.test(slots, std::vector<int>{1}));
  EXPECT_THROW(compile(parse_expression("Robot.flying", o), layout), EvalError);
  EXPECT_THROW(compile(parse_expression("nope + 1"), layout), EvalError);
  EXPECT_THROW(compile(Expr::clock("t"), layout), EvalError);
}
