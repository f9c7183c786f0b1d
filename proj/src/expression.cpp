#include "hmap/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "hmap/errors.hpp"

namespace hmap {

namespace {

enum Op : int {
  kConst,
  kVar,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
  kNeg,
  kExp,
  kLog,
  kSqrt,
  kSin,
  kCos,
  kTan,
  kSinh,
  kCosh,
  kTanh,
};

bool is_unary_function(int op) { return op >= kNeg; }

}  // namespace

struct Expression::Node {
  int op = kConst;
  double value = 0.0;
  int var = 0;
  std::shared_ptr<const Node> a;
  std::shared_ptr<const Node> b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_const(double v) {
  auto n = std::make_shared<Expression::Node>();
  n->op = kConst;
  n->value = v;
  return n;
}

NodePtr make_var(int axis) {
  auto n = std::make_shared<Expression::Node>();
  n->op = kVar;
  n->var = axis;
  return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == kConst && n->value == v; }

double apply_unary(int op, double x) {
  switch (op) {
    case kNeg: return -x;
    case kExp: return std::exp(x);
    case kLog: return std::log(x);
    case kSqrt: return std::sqrt(x);
    case kSin: return std::sin(x);
    case kCos: return std::cos(x);
    case kTan: return std::tan(x);
    case kSinh: return std::sinh(x);
    case kCosh: return std::cosh(x);
    case kTanh: return std::tanh(x);
    default: return x;
  }
}

double apply_binary(int op, double x, double y) {
  switch (op) {
    case kAdd: return x + y;
    case kSub: return x - y;
    case kMul: return x * y;
    case kDiv: return x / y;
    case kPow: return std::pow(x, y);
    default: return 0.0;
  }
}

NodePtr make_unary(int op, NodePtr a) {
  if (a->op == kConst) return make_const(apply_unary(op, a->value));
  if (op == kNeg && a->op == kNeg) return a->a;
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  return n;
}

NodePtr make_binary(int op, NodePtr a, NodePtr b) {
  if (a->op == kConst && b->op == kConst) return make_const(apply_binary(op, a->value, b->value));
  switch (op) {
    case kAdd:
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case kSub:
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return make_unary(kNeg, b);
      break;
    case kMul:
      if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return make_unary(kNeg, b);
      if (is_const(b, -1.0)) return make_unary(kNeg, a);
      break;
    case kDiv:
      if (is_const(a, 0.0)) return make_const(0.0);
      if (is_const(b, 1.0)) return a;
      break;
    case kPow:
      if (is_const(b, 0.0)) return make_const(1.0);
      if (is_const(b, 1.0)) return a;
      break;
    default:
      break;
  }
  auto n = std::make_shared<Expression::Node>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  return n;
}

NodePtr differentiate(const NodePtr& n, int axis) {
  const auto d = [axis](const NodePtr& m) { return differentiate(m, axis); };
  switch (n->op) {
    case kConst: return make_const(0.0);
    case kVar: return make_const(n->var == axis ? 1.0 : 0.0);
    case kAdd: return make_binary(kAdd, d(n->a), d(n->b));
    case kSub: return make_binary(kSub, d(n->a), d(n->b));
    case kMul:
      return make_binary(kAdd, make_binary(kMul, d(n->a), n->b), make_binary(kMul, n->a, d(n->b)));
    case kDiv:
      return make_binary(kDiv,
                         make_binary(kSub, make_binary(kMul, d(n->a), n->b),
                                     make_binary(kMul, n->a, d(n->b))),
                         make_binary(kMul, n->b, n->b));
    case kPow: {
      if (n->b->op == kConst) {
        const double c = n->b->value;
        return make_binary(kMul,
                           make_binary(kMul, make_const(c), make_binary(kPow, n->a, make_const(c - 1.0))),
                           d(n->a));
      }
      // d(a^b) = a^b (b' log a + b a'/a)
      auto term = make_binary(kAdd, make_binary(kMul, d(n->b), make_unary(kLog, n->a)),
                              make_binary(kDiv, make_binary(kMul, n->b, d(n->a)), n->a));
      return make_binary(kMul, n, term);
    }
    case kNeg: return make_unary(kNeg, d(n->a));
    case kExp: return make_binary(kMul, n, d(n->a));
    case kLog: return make_binary(kDiv, d(n->a), n->a);
    case kSqrt: return make_binary(kDiv, d(n->a), make_binary(kMul, make_const(2.0), n));
    case kSin: return make_binary(kMul, make_unary(kCos, n->a), d(n->a));
    case kCos: return make_unary(kNeg, make_binary(kMul, make_unary(kSin, n->a), d(n->a)));
    case kTan:
      return make_binary(kMul, make_binary(kAdd, make_const(1.0), make_binary(kMul, n, n)), d(n->a));
    case kSinh: return make_binary(kMul, make_unary(kCosh, n->a), d(n->a));
    case kCosh: return make_binary(kMul, make_unary(kSinh, n->a), d(n->a));
    case kTanh:
      return make_binary(kMul, make_binary(kSub, make_const(1.0), make_binary(kMul, n, n)), d(n->a));
    default: return make_const(0.0);
  }
}

const char* function_name(int op) {
  switch (op) {
    case kExp: return "exp";
    case kLog: return "log";
    case kSqrt: return "sqrt";
    case kSin: return "sin";
    case kCos: return "cos";
    case kTan: return "tan";
    case kSinh: return "sinh";
    case kCosh: return "cosh";
    case kTanh: return "tanh";
    default: return "?";
  }
}

void print(const NodePtr& n, std::ostringstream& os) {
  switch (n->op) {
    case kConst: os << n->value; return;
    case kVar: os << 'x' << (n->var + 1); return;
    case kNeg:
      os << "(-";
      print(n->a, os);
      os << ')';
      return;
    case kAdd:
    case kSub:
    case kMul:
    case kDiv:
    case kPow: {
      static const char symbols[] = {'+', '-', '*', '/', '^'};
      os << '(';
      print(n->a, os);
      os << symbols[n->op - kAdd];
      print(n->b, os);
      os << ')';
      return;
    }
    default:
      os << function_name(n->op) << '(';
      print(n->a, os);
      os << ')';
  }
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    auto n = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& message) const {
    throw ExpressionError("expression error at column " + std::to_string(pos_ + 1) + ": " +
                              message + " in '" + std::string(text_) + "'",
                          pos_);
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  // Accepts the ASCII operator or its typographic spelling (U+2212, U+00D7).
  bool accept(char ascii) {
    skip_space();
    if (pos_ < text_.size() && text_[pos_] == ascii) {
      ++pos_;
      return true;
    }
    const std::string_view rest = text_.substr(pos_);
    if (ascii == '-' && rest.starts_with("\xE2\x88\x92")) {
      pos_ += 3;
      return true;
    }
    if (ascii == '*' && rest.starts_with("\xC3\x97")) {
      pos_ += 2;
      return true;
    }
    return false;
  }

  NodePtr parse_sum() {
    auto lhs = parse_product();
    while (true) {
      if (accept('+')) {
        lhs = make_binary(kAdd, lhs, parse_product());
      } else if (accept('-')) {
        lhs = make_binary(kSub, lhs, parse_product());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_product() {
    auto lhs = parse_unary();
    while (true) {
      if (accept('*')) {
        lhs = make_binary(kMul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make_binary(kDiv, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make_unary(kNeg, parse_unary());
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  NodePtr parse_power() {
    auto base = parse_primary();
    if (accept('^')) return make_binary(kPow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (accept('(')) {
      auto inner = parse_sum();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const std::string tail(text_.substr(pos_));
      char* end = nullptr;
      const double v = std::strtod(tail.c_str(), &end);
      if (end == tail.c_str()) fail("malformed number");
      pos_ += static_cast<std::size_t>(end - tail.c_str());
      return make_const(v);
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() &&
             (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
        ++pos_;
      const std::string name(text_.substr(start, pos_ - start));
      if (name == "x1") return make_var(0);
      if (name == "x2") return make_var(1);
      if (name == "x3") return make_var(2);
      if (name == "pi") return make_const(kPi);
      if (name == "e") return make_const(std::exp(1.0));
      static const std::pair<const char*, int> functions[] = {
          {"exp", kExp},   {"log", kLog},   {"sqrt", kSqrt}, {"sin", kSin},  {"cos", kCos},
          {"tan", kTan},   {"sinh", kSinh}, {"cosh", kCosh}, {"tanh", kTanh}};
      for (const auto& [fname, op] : functions) {
        if (name == fname) {
          if (!accept('(')) fail("expected '(' after " + name);
          auto arg = parse_sum();
          if (!accept(')')) fail("expected ')'");
          return make_unary(op, arg);
        }
      }
      pos_ = start;
      fail("unknown identifier '" + name + "'");
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : Expression(make_const(0.0)) {}

Expression::Expression(std::shared_ptr<const Node> root) : root_(std::move(root)) { compile(); }

Expression Expression::parse(std::string_view text) { return Expression(Parser(text).parse()); }
Expression Expression::constant(double value) { return Expression(make_const(value)); }
Expression Expression::variable(int axis) {
  if (axis < 0 || axis > 2) throw DomainError("variable axis must be 0, 1 or 2");
  return Expression(make_var(axis));
}

void Expression::compile() {
  program_.clear();
  int depth = 0;
  max_stack_ = 0;
  // Post-order traversal without recursion limits on typical sizes.
  struct Frame {
    const Node* node;
    int state;
  };
  std::vector<Frame> stack{{root_.get(), 0}};
  while (!stack.empty()) {
    Frame& f = stack.back();
    const Node* n = f.node;
    if (n->op == kConst || n->op == kVar) {
      program_.push_back({n->op, n->var, n->value});
      max_stack_ = std::max(max_stack_, ++depth);
      stack.pop_back();
      continue;
    }
    if (f.state == 0) {
      f.state = 1;
      stack.push_back({n->a.get(), 0});
      continue;
    }
    if (f.state == 1 && !is_unary_function(n->op)) {
      f.state = 2;
      stack.push_back({n->b.get(), 0});
      continue;
    }
    program_.push_back({n->op, 0, 0.0});
    if (!is_unary_function(n->op)) --depth;
    stack.pop_back();
  }
}

double Expression::operator()(const Vec3& x) const {
  constexpr int kInline = 64;
  double inline_stack[kInline] = {};
  std::vector<double> heap;
  double* s = inline_stack;
  if (max_stack_ > kInline) {
    heap.resize(static_cast<std::size_t>(max_stack_));
    s = heap.data();
  }
  int top = 0;
  for (const Instruction& in : program_) {
    switch (in.op) {
      case kConst: s[top++] = in.value; break;
      case kVar: s[top++] = x[in.var]; break;
      case kAdd: --top; s[top - 1] += s[top]; break;
      case kSub: --top; s[top - 1] -= s[top]; break;
      case kMul: --top; s[top - 1] *= s[top]; break;
      case kDiv: --top; s[top - 1] /= s[top]; break;
      case kPow: --top; s[top - 1] = std::pow(s[top - 1], s[top]); break;
      default: s[top - 1] = apply_unary(in.op, s[top - 1]);
    }
  }
  return s[0];
}

Expression Expression::derivative(int axis) const { return Expression(differentiate(root_, axis)); }

bool Expression::is_constant() const { return root_->op == kConst; }
double Expression::constant_value() const { return root_->value; }

std::string Expression::to_string() const {
  std::ostringstream os;
  os.precision(17);
  print(root_, os);
  return os.str();
}

Expression operator+(const Expression& a, const Expression& b) {
  return Expression(make_binary(kAdd, a.root_, b.root_));
}
Expression operator-(const Expression& a, const Expression& b) {
  return Expression(make_binary(kSub, a.root_, b.root_));
}
Expression operator*(const Expression& a, const Expression& b) {
  return Expression(make_binary(kMul, a.root_, b.root_));
}
Expression operator/(const Expression& a, const Expression& b) {
  return Expression(make_binary(kDiv, a.root_, b.root_));
}
Expression operator-(const Expression& a) { return Expression(make_unary(kNeg, a.root_)); }
Expression pow(const Expression& a, const Expression& b) {
  return Expression(make_binary(kPow, a.root_, b.root_));
}
Expression exp(const Expression& a) { return Expression(make_unary(kExp, a.root_)); }
Expression log(const Expression& a) { return Expression(make_unary(kLog, a.root_)); }
Expression sqrt(const Expression& a) { return Expression(make_unary(kSqrt, a.root_)); }
Expression sin(const Expression& a) { return Expression(make_unary(kSin, a.root_)); }
Expression cos(const Expression& a) { return Expression(make_unary(kCos, a.root_)); }
Expression sinh(const Expression& a) { return Expression(make_unary(kSinh, a.root_)); }
Expression cosh(const Expression& a) { return Expression(make_unary(kCosh, a.root_)); }

ExpressionJet::ExpressionJet(const Expression& e) : value(e) {
  for (int i = 0; i < 3; ++i) first[static_cast<std::size_t>(i)] = e.derivative(i);
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      second[i][j] = first[static_cast<std::size_t>(i)].derivative(j);
      second[j][i] = second[i][j];
    }
  }
}

}  // namespace hmap
