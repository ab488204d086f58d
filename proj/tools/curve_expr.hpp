#pragma once

// Tiny closed grammar for periodic functions of t:
//   expr   := term (('+' | '-') term)*
//   term   := factor ('*' factor)*
//   factor := number | 't'-free trig | '(' expr ')' | '-' factor
//   trig   := ('cos' | 'sin') '(' [integer ['*']] 't' ')'
// e.g. "1+0.15*cos(3t)", "1 + 0.05*cos(2*t)*sin(t)".

#include <memory>
#include <string>
#include <vector>

#include "ovma/spectral.hpp"

namespace ovma::cli {

class CurveExpr {
 public:
  /// Throws ArgumentError with the offending position.
  static CurveExpr parse(const std::string& text);

  double operator()(double t) const;
  std::vector<double> sample(int n) const;
  /// Exact trigonometric series (the grammar is closed under products).
  spectral::TrigSeries series() const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
  int degree_ = 0;
};

}  // namespace ovma::cli
