#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>

namespace bhplab {

/// A closed-form scalar field f(x, y) parsed from text.
///
/// Grammar (whitespace-insensitive):
///
///     expr    := term (('+' | '-') term)*
///     term    := unary (('*' | '/') unary)*
///     unary   := ('+' | '-') unary | primary
///     primary := number | 'x' | 'y' | name | func '(' expr ')' | '(' expr ')'
///     func    := 'sin' | 'cos' | 'exp'
///
/// `name` resolves against the constant table given to parse(); `pi` is
/// always defined. Unknown names and trailing input raise ParseError.
class Expression {
 public:
  using Constants = std::map<std::string, double, std::less<>>;

  /// The constant zero.
  Expression();

  static Expression parse(std::string_view text, const Constants& constants = {});
  static Expression constant(double value);

  double operator()(double x, double y) const;

  /// True when the expression does not depend on x or y.
  bool is_constant() const;
  /// True when the expression is the literal constant 0.
  bool is_zero() const;

  const std::string& text() const { return text_; }

  struct Node;

 private:
  Expression(std::shared_ptr<const Node> root, std::string text);

  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace bhplab
