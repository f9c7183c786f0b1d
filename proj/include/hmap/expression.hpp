#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hmap/types.hpp"

namespace hmap {

/// Scalar expression in the coordinates x1, x2, x3.
///
/// Grammar: numbers, the constants `pi` and `e`, variables `x1 x2 x3`,
/// binary `+ - * / ^` (right-associative power), unary minus, and the
/// functions exp, log, sqrt, sin, cos, tan, sinh, cosh, tanh. Expressions
/// differentiate symbolically, so metrics built from them get exact
/// derivatives. Evaluation runs a flattened postfix program.
class Expression {
 public:
  struct Node;

  Expression();  // the constant 0
  static Expression parse(std::string_view text);
  static Expression constant(double value);
  static Expression variable(int axis);

  double operator()(const Vec3& x) const;

  Expression derivative(int axis) const;

  bool is_constant() const;
  // Valid only when is_constant().
  double constant_value() const;

  std::string to_string() const;

  friend Expression operator+(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a, const Expression& b);
  friend Expression operator*(const Expression& a, const Expression& b);
  friend Expression operator/(const Expression& a, const Expression& b);
  friend Expression operator-(const Expression& a);
  friend Expression pow(const Expression& a, const Expression& b);
  friend Expression exp(const Expression& a);
  friend Expression log(const Expression& a);
  friend Expression sqrt(const Expression& a);
  friend Expression sin(const Expression& a);
  friend Expression cos(const Expression& a);
  friend Expression sinh(const Expression& a);
  friend Expression cosh(const Expression& a);

 private:
  explicit Expression(std::shared_ptr<const Node> root);
  void compile();

  struct Instruction {
    int op;
    int var;
    double value;
  };

  std::shared_ptr<const Node> root_;
  std::vector<Instruction> program_;
  int max_stack_ = 0;
};

/// Gradient and Hessian of an expression, kept together because metric and
/// manufactured-solution code always needs them as a set.
struct ExpressionJet {
  Expression value;
  std::array<Expression, 3> first;
  std::array<std::array<Expression, 3>, 3> second;

  explicit ExpressionJet(const Expression& e);
};

}  // namespace hmap
