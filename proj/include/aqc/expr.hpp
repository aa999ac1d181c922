#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aqc/errors.hpp"

namespace aqc {

using VarIndex = std::uint32_t;

/// Raised by evaluation. MissingBinding is an input error, Singularity a
/// numerical one (negative power of a zero base).
class EvalError : public Error {
 public:
  enum class Reason { MissingBinding, Singularity };
  EvalError(Reason reason, const std::string& msg)
      : Error(reason == Reason::MissingBinding ? ErrorKind::InvalidInput : ErrorKind::NumericalFailure, msg),
        reason_(reason) {}
  Reason reason() const noexcept { return reason_; }

 private:
  Reason reason_;
};

/// Value plus exact partial derivatives, sorted by variable index.
struct Gradient {
  double value = 0.0;
  std::vector<std::pair<VarIndex, double>> partials;
  /// Set when an AbsDiff was evaluated at a tie; the partials then hold a
  /// zero subgradient for that node.
  bool non_smooth = false;

  double partial(VarIndex v) const;
};

/// Immutable expression tree over indexed variables. Cheap to copy; subtrees
/// are shared.
class Expr {
 public:
  enum class Kind { Constant, Var, Sum, Product, Power, Cos, Sin, AbsDiff };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v);
  static Expr var(VarIndex index);
  static Expr sum(std::vector<Expr> terms);
  static Expr product(std::vector<Expr> factors);
  static Expr power(Expr base, int exponent);
  static Expr cos(Expr arg);
  static Expr sin(Expr arg);
  static Expr abs_diff(Expr a, Expr b);

  Kind kind() const noexcept { return node_->kind; }
  double constant_value() const noexcept { return node_->value; }
  VarIndex var_index() const noexcept { return node_->var; }
  int exponent() const noexcept { return node_->exponent; }
  std::span<const Expr> children() const noexcept { return node_->children; }

  /// `values[i]` is the value of variable i; NaN marks an unbound variable.
  double evaluate(std::span<const double> values) const;
  Gradient gradient(std::span<const double> values) const;

  std::set<VarIndex> variables() const;
  bool depends_on(VarIndex v) const;
  bool is_constant() const { return variables().empty(); }

  /// Folds constants inside products and sums and flattens nested products.
  Expr simplified() const;

  /// Rewrites every reference to variable `from` as `to`.
  Expr substituted(VarIndex from, const Expr& to) const;

  /// Prefix notation, e.g. "(* 0.5 v3 (cos v4))". Numbers are printed with
  /// round-trip precision so the string identifies the tree.
  std::string to_string(const std::function<std::string(VarIndex)>& name = {}) const;

 private:
  struct Node {
    Kind kind;
    double value = 0.0;
    VarIndex var = 0;
    int exponent = 0;
    std::vector<Expr> children;
  };
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}

  void collect(std::set<VarIndex>& out) const;
  void gradient_into(std::span<const double> values, Gradient& out) const;

  std::shared_ptr<const Node> node_;
};

Expr operator+(const Expr& a, const Expr& b);
Expr operator*(const Expr& a, const Expr& b);
Expr operator*(double c, const Expr& a);
Expr operator-(const Expr& a);
Expr operator-(const Expr& a, const Expr& b);

/// Splits `e` into (c, rest) with e == c * rest, pulling every constant factor
/// out of (possibly nested) products. A pure constant gives (value, 1).
std::pair<double, Expr> split_constant(const Expr& e);

/// If `e` equals v * g with g independent of v, returns g.
std::optional<Expr> linear_factor(const Expr& e, VarIndex v);

/// Flattened copy of an expression for repeated evaluation without
/// allocation. Gradients use reverse accumulation.
class ExprTape {
 public:
  ExprTape() = default;
  explicit ExprTape(const Expr& e);

  /// Returns false on a singularity. Throws EvalError on a missing binding.
  bool evaluate(std::span<const double> values, double& value) const;
  /// Like evaluate, and appends (variable, partial) pairs to `partials`; a
  /// variable used more than once appears once per use.
  bool gradient(std::span<const double> values, double& value,
                std::vector<std::pair<VarIndex, double>>& partials) const;

 private:
  struct Op {
    Expr::Kind kind;
    double value;
    VarIndex var;
    int exponent;
    std::uint32_t first_child;
    std::uint32_t n_children;
  };
  std::uint32_t append(const Expr& e);
  bool forward(std::span<const double> values, std::vector<double>& vals) const;

  std::vector<Op> ops_;  // children precede parents; root last
  std::vector<std::uint32_t> children_;
};

using NameResolver = std::function<std::optional<VarIndex>(std::string_view)>;

/// Parses prefix notation:
///   number | name | pi
///   (+ e...) (- e) (- a b) (* e...) (/ a b) (^ e int) (cos e) (sin e) (absdiff a b)
/// Throws InvalidInput with the character offset on malformed text.
Expr parse_expr(std::string_view text, const NameResolver& resolve);

}  // namespace aqc
