#include "bhplab/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <variant>

#include "bhplab/error.hpp"

namespace bhplab {

namespace {

enum class Op { add, sub, mul, div, neg, sin, cos, exp };

}  // namespace

struct Expression::Node {
  struct Literal { double value; };
  struct VarX {};
  struct VarY {};
  struct Apply {
    Op op;
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;  // null for unary ops
  };

  std::variant<Literal, VarX, VarY, Apply> payload;

  double eval(double x, double y) const {
    return std::visit(
        [&](const auto& n) -> double {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Literal>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, VarX>) {
            return x;
          } else if constexpr (std::is_same_v<T, VarY>) {
            return y;
          } else {
            const double a = n.lhs->eval(x, y);
            switch (n.op) {
              case Op::add: return a + n.rhs->eval(x, y);
              case Op::sub: return a - n.rhs->eval(x, y);
              case Op::mul: return a * n.rhs->eval(x, y);
              case Op::div: return a / n.rhs->eval(x, y);
              case Op::neg: return -a;
              case Op::sin: return std::sin(a);
              case Op::cos: return std::cos(a);
              case Op::exp: return std::exp(a);
            }
            return 0.0;
          }
        },
        payload);
  }

  bool depends_on_xy() const {
    return std::visit(
        [](const auto& n) -> bool {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, Literal>) {
            return false;
          } else if constexpr (std::is_same_v<T, Apply>) {
            return n.lhs->depends_on_xy() || (n.rhs && n.rhs->depends_on_xy());
          } else {
            return true;
          }
        },
        payload);
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_literal(double v) {
  return std::make_shared<const Expression::Node>(Expression::Node{Expression::Node::Literal{v}});
}

NodePtr make_apply(Op op, NodePtr lhs, NodePtr rhs = nullptr) {
  // Fold constant subtrees so that is_constant()/is_zero() see through them.
  auto node = std::make_shared<const Expression::Node>(
      Expression::Node{Expression::Node::Apply{op, std::move(lhs), std::move(rhs)}});
  if (!node->depends_on_xy()) return make_literal(node->eval(0.0, 0.0));
  return node;
}

class Parser {
 public:
  Parser(std::string_view text, const Expression::Constants& constants)
      : text_(text), constants_(constants) {}

  NodePtr parse() {
    NodePtr root = expr();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::ParseError,
                what + " at offset " + std::to_string(pos_) + " in '" + std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) {
        lhs = make_apply(Op::add, lhs, term());
      } else if (accept('-')) {
        lhs = make_apply(Op::sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) {
        lhs = make_apply(Op::mul, lhs, unary());
      } else if (accept('/')) {
        lhs = make_apply(Op::div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr unary() {
    if (accept('-')) return make_apply(Op::neg, unary());
    if (accept('+')) return unary();
    return primary();
  }

  NodePtr primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  NodePtr number() {
    double value = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc()) fail("malformed number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return make_literal(value);
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
      ++pos_;
    const std::string_view name = text_.substr(start, pos_ - start);
    if (name == "x") return std::make_shared<const Expression::Node>(Expression::Node{Expression::Node::VarX{}});
    if (name == "y") return std::make_shared<const Expression::Node>(Expression::Node{Expression::Node::VarY{}});
    if (name == "sin" || name == "cos" || name == "exp") {
      if (!accept('(')) fail("expected '(' after " + std::string(name));
      NodePtr arg = expr();
      if (!accept(')')) fail("expected ')'");
      const Op op = name == "sin" ? Op::sin : (name == "cos" ? Op::cos : Op::exp);
      return make_apply(op, arg);
    }
    if (auto it = constants_.find(name); it != constants_.end()) return make_literal(it->second);
    if (name == "pi") return make_literal(std::numbers::pi);
    pos_ = start;
    fail("unknown name '" + std::string(name) + "'");
  }

  std::string_view text_;
  const Expression::Constants& constants_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : Expression(make_literal(0.0), "0") {}

Expression::Expression(std::shared_ptr<const Node> root, std::string text)
    : root_(std::move(root)), text_(std::move(text)) {}

Expression Expression::parse(std::string_view text, const Constants& constants) {
  Parser parser(text, constants);
  return Expression(parser.parse(), std::string(text));
}

Expression Expression::constant(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return Expression(make_literal(value), std::string(buf, ptr));
}

double Expression::operator()(double x, double y) const { return root_->eval(x, y); }

bool Expression::is_constant() const { return !root_->depends_on_xy(); }

bool Expression::is_zero() const { return is_constant() && root_->eval(0.0, 0.0) == 0.0; }

}  // namespace bhplab
