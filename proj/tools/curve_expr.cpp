#include "curve_expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

#include "ovma/errors.hpp"

namespace ovma::cli {

struct CurveExpr::Node {
  enum Kind { Const, Cos, Sin, Add, Sub, Mul, Neg } kind = Const;
  double value = 0.0;  // Const
  int k = 0;           // Cos, Sin
  std::shared_ptr<const Node> lhs, rhs;

  double eval(double t) const {
    switch (kind) {
      case Const: return value;
      case Cos: return std::cos(k * t);
      case Sin: return std::sin(k * t);
      case Add: return lhs->eval(t) + rhs->eval(t);
      case Sub: return lhs->eval(t) - rhs->eval(t);
      case Mul: return lhs->eval(t) * rhs->eval(t);
      case Neg: return -lhs->eval(t);
    }
    return 0.0;
  }
  int degree() const {
    switch (kind) {
      case Const: return 0;
      case Cos:
      case Sin: return k;
      case Add:
      case Sub: return std::max(lhs->degree(), rhs->degree());
      case Mul: return lhs->degree() + rhs->degree();
      case Neg: return lhs->degree();
    }
    return 0;
  }
};

namespace {

using NodeP = std::shared_ptr<const CurveExpr::Node>;
using Node = CurveExpr::Node;

class Parser {
 public:
  explicit Parser(const std::string& s) : s_(s) {}

  NodeP parse() {
    NodeP n = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected character");
    return n;
  }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;

  [[noreturn]] void fail(const std::string& why) const {
    throw ArgumentError("curve expression '" + s_ + "': " + why + " at position " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool eat_word(const char* w) {
    skip();
    const std::size_t n = std::char_traits<char>::length(w);
    if (s_.compare(pos_, n, w) == 0) {
      pos_ += n;
      return true;
    }
    return false;
  }
  static NodeP make(Node::Kind kind, NodeP a, NodeP b = nullptr) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->lhs = std::move(a);
    n->rhs = std::move(b);
    return n;
  }

  NodeP expr() {
    NodeP n = term();
    while (true) {
      if (eat('+')) n = make(Node::Add, n, term());
      else if (eat('-')) n = make(Node::Sub, n, term());
      else return n;
    }
  }
  NodeP term() {
    NodeP n = factor();
    while (eat('*')) n = make(Node::Mul, n, factor());
    return n;
  }
  NodeP factor() {
    skip();
    if (eat('-')) return make(Node::Neg, factor());
    if (eat('(')) {
      NodeP n = expr();
      if (!eat(')')) fail("expected ')'");
      return n;
    }
    if (eat_word("cos")) return trig(Node::Cos);
    if (eat_word("sin")) return trig(Node::Sin);
    return number();
  }
  NodeP trig(Node::Kind kind) {
    if (!eat('(')) fail("expected '(' after cos/sin");
    skip();
    int k = 1;
    if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
      k = 0;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        k = 10 * k + (s_[pos_] - '0');
        if (k > 4096) fail("frequency too large");
        ++pos_;
      }
      eat('*');
    }
    if (!eat('t')) fail("expected 't'");
    if (!eat(')')) fail("expected ')'");
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->k = k;
    return n;
  }
  NodeP number() {
    skip();
    const char* begin = s_.c_str() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || !std::isfinite(v)) fail("expected a number, cos(k t) or sin(k t)");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Node>();
    n->value = v;
    return n;
  }
};

}  // namespace

CurveExpr CurveExpr::parse(const std::string& text) {
  CurveExpr e;
  e.text_ = text;
  e.root_ = Parser(text).parse();
  e.degree_ = e.root_->degree();
  return e;
}

double CurveExpr::operator()(double t) const { return root_->eval(t); }

std::vector<double> CurveExpr::sample(int n) const {
  std::vector<double> out(n);
  for (int j = 0; j < n; ++j) out[j] = (*this)(2.0 * M_PI * j / n);
  return out;
}

spectral::TrigSeries CurveExpr::series() const {
  int n = 16;
  while (n <= 2 * degree_ + 1) n *= 2;
  return spectral::TrigSeries::from_samples(sample(n), 1e-15);
}

}  // namespace ovma::cli
