#include "aqc/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace aqc {

double Gradient::partial(VarIndex v) const {
  auto it = std::lower_bound(partials.begin(), partials.end(), v,
                             [](const auto& p, VarIndex x) { return p.first < x; });
  return (it != partials.end() && it->first == v) ? it->second : 0.0;
}

Expr Expr::constant(double v) { return Expr(std::make_shared<const Node>(Node{Kind::Constant, v, 0, 0, {}})); }
Expr Expr::var(VarIndex index) { return Expr(std::make_shared<const Node>(Node{Kind::Var, 0.0, index, 0, {}})); }

Expr Expr::sum(std::vector<Expr> terms) {
  if (terms.empty()) return constant(0.0);
  if (terms.size() == 1) return terms.front();
  return Expr(std::make_shared<const Node>(Node{Kind::Sum, 0.0, 0, 0, std::move(terms)}));
}

Expr Expr::product(std::vector<Expr> factors) {
  if (factors.empty()) return constant(1.0);
  if (factors.size() == 1) return factors.front();
  return Expr(std::make_shared<const Node>(Node{Kind::Product, 0.0, 0, 0, std::move(factors)}));
}

Expr Expr::power(Expr base, int exponent) {
  return Expr(std::make_shared<const Node>(Node{Kind::Power, 0.0, 0, exponent, {std::move(base)}}));
}

Expr Expr::cos(Expr arg) { return Expr(std::make_shared<const Node>(Node{Kind::Cos, 0.0, 0, 0, {std::move(arg)}})); }
Expr Expr::sin(Expr arg) { return Expr(std::make_shared<const Node>(Node{Kind::Sin, 0.0, 0, 0, {std::move(arg)}})); }

Expr Expr::abs_diff(Expr a, Expr b) {
  return Expr(std::make_shared<const Node>(Node{Kind::AbsDiff, 0.0, 0, 0, {std::move(a), std::move(b)}}));
}

namespace {

double int_pow(double base, int exponent) {
  unsigned e = exponent < 0 ? static_cast<unsigned>(-exponent) : static_cast<unsigned>(exponent);
  double r = 1.0;
  for (double b = base; e > 0; e >>= 1, b *= b) {
    if (e & 1U) r *= b;
  }
  return exponent < 0 ? 1.0 / r : r;
}

double checked_pow(double base, int exponent) {
  if (exponent < 0 && base == 0.0) {
    throw EvalError(EvalError::Reason::Singularity, "negative power of zero");
  }
  return int_pow(base, exponent);
}

}  // namespace

double Expr::evaluate(std::span<const double> values) const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant: return n.value;
    case Kind::Var: {
      if (n.var >= values.size() || std::isnan(values[n.var])) {
        throw EvalError(EvalError::Reason::MissingBinding, "variable v" + std::to_string(n.var) + " is unassigned");
      }
      return values[n.var];
    }
    case Kind::Sum: {
      double s = 0.0;
      for (const auto& c : n.children) s += c.evaluate(values);
      return s;
    }
    case Kind::Product: {
      double p = 1.0;
      for (const auto& c : n.children) p *= c.evaluate(values);
      return p;
    }
    case Kind::Power: return checked_pow(n.children[0].evaluate(values), n.exponent);
    case Kind::Cos: return std::cos(n.children[0].evaluate(values));
    case Kind::Sin: return std::sin(n.children[0].evaluate(values));
    case Kind::AbsDiff: return std::abs(n.children[0].evaluate(values) - n.children[1].evaluate(values));
  }
  return 0.0;
}

namespace {

using Partials = std::vector<std::pair<VarIndex, double>>;

// out += scale * in, both sorted by index.
void axpy(Partials& out, double scale, const Partials& in) {
  if (scale == 0.0 || in.empty()) return;
  Partials merged;
  merged.reserve(out.size() + in.size());
  auto a = out.begin();
  auto b = in.begin();
  while (a != out.end() || b != in.end()) {
    if (b == in.end() || (a != out.end() && a->first < b->first)) {
      merged.push_back(*a++);
    } else if (a == out.end() || b->first < a->first) {
      merged.emplace_back(b->first, scale * b->second);
      ++b;
    } else {
      merged.emplace_back(a->first, a->second + scale * b->second);
      ++a;
      ++b;
    }
  }
  out = std::move(merged);
}

}  // namespace

void Expr::gradient_into(std::span<const double> values, Gradient& out) const {
  const Node& n = *node_;
  out.partials.clear();
  switch (n.kind) {
    case Kind::Constant:
      out.value = n.value;
      return;
    case Kind::Var:
      out.value = evaluate(values);
      out.partials.emplace_back(n.var, 1.0);
      return;
    case Kind::Sum: {
      out.value = 0.0;
      Gradient child;
      for (const auto& c : n.children) {
        c.gradient_into(values, child);
        out.value += child.value;
        out.non_smooth |= child.non_smooth;
        axpy(out.partials, 1.0, child.partials);
      }
      return;
    }
    case Kind::Product: {
      // d(prod) = sum_k (prod_{j!=k} f_j) df_k, computed without division so
      // zero factors are handled.
      const std::size_t m = n.children.size();
      std::vector<Gradient> parts(m);
      for (std::size_t k = 0; k < m; ++k) {
        n.children[k].gradient_into(values, parts[k]);
        out.non_smooth |= parts[k].non_smooth;
      }
      std::vector<double> prefix(m + 1, 1.0), suffix(m + 1, 1.0);
      for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] * parts[k].value;
      for (std::size_t k = m; k-- > 0;) suffix[k] = suffix[k + 1] * parts[k].value;
      out.value = prefix[m];
      for (std::size_t k = 0; k < m; ++k) axpy(out.partials, prefix[k] * suffix[k + 1], parts[k].partials);
      return;
    }
    case Kind::Power: {
      Gradient base;
      n.children[0].gradient_into(values, base);
      out.non_smooth |= base.non_smooth;
      out.value = checked_pow(base.value, n.exponent);
      const double d = n.exponent == 0 ? 0.0 : n.exponent * checked_pow(base.value, n.exponent - 1);
      axpy(out.partials, d, base.partials);
      return;
    }
    case Kind::Cos:
    case Kind::Sin: {
      Gradient arg;
      n.children[0].gradient_into(values, arg);
      out.non_smooth |= arg.non_smooth;
      const bool is_cos = n.kind == Kind::Cos;
      out.value = is_cos ? std::cos(arg.value) : std::sin(arg.value);
      const double d = is_cos ? -std::sin(arg.value) : std::cos(arg.value);
      axpy(out.partials, d, arg.partials);
      return;
    }
    case Kind::AbsDiff: {
      Gradient a, b;
      n.children[0].gradient_into(values, a);
      n.children[1].gradient_into(values, b);
      out.non_smooth |= a.non_smooth || b.non_smooth;
      const double diff = a.value - b.value;
      out.value = std::abs(diff);
      if (diff == 0.0) {
        out.non_smooth = true;
        return;
      }
      const double s = diff > 0.0 ? 1.0 : -1.0;
      axpy(out.partials, s, a.partials);
      axpy(out.partials, -s, b.partials);
      return;
    }
  }
}

Gradient Expr::gradient(std::span<const double> values) const {
  Gradient g;
  gradient_into(values, g);
  return g;
}

void Expr::collect(std::set<VarIndex>& out) const {
  if (node_->kind == Kind::Var) out.insert(node_->var);
  for (const auto& c : node_->children) c.collect(out);
}

std::set<VarIndex> Expr::variables() const {
  std::set<VarIndex> out;
  collect(out);
  return out;
}

bool Expr::depends_on(VarIndex v) const {
  if (node_->kind == Kind::Var) return node_->var == v;
  return std::any_of(node_->children.begin(), node_->children.end(),
                     [v](const Expr& c) { return c.depends_on(v); });
}

Expr Expr::simplified() const {
  const Node& n = *node_;
  switch (n.kind) {
    case Kind::Constant:
    case Kind::Var:
      return *this;
    case Kind::Sum: {
      double c = 0.0;
      std::vector<Expr> rest;
      for (const auto& child : n.children) {
        Expr s = child.simplified();
        if (s.kind() == Kind::Constant) {
          c += s.constant_value();
        } else if (s.kind() == Kind::Sum) {
          for (const auto& g : s.children()) rest.push_back(g);
        } else {
          rest.push_back(s);
        }
      }
      if (c != 0.0 || rest.empty()) rest.insert(rest.begin(), constant(c));
      return sum(std::move(rest));
    }
    case Kind::Product: {
      std::vector<Expr> simple_children;
      for (const auto& child : n.children) simple_children.push_back(child.simplified());
      auto [c, rest] = split_constant(product(std::move(simple_children)));
      if (c == 0.0) return constant(0.0);
      std::vector<Expr> factors;
      if (rest.kind() == Kind::Product) {
        for (const auto& f : rest.children()) factors.push_back(f);
      } else if (rest.kind() != Kind::Constant) {
        factors.push_back(rest);
      }
      if (c != 1.0 || factors.empty()) factors.insert(factors.begin(), constant(c));
      return product(std::move(factors));
    }
    case Kind::Power: {
      Expr b = n.children[0].simplified();
      if (b.kind() == Kind::Constant) return constant(checked_pow(b.constant_value(), n.exponent));
      if (n.exponent == 1) return b;
      return power(b, n.exponent);
    }
    case Kind::Cos:
    case Kind::Sin: {
      Expr a = n.children[0].simplified();
      if (a.kind() == Kind::Constant) {
        return constant(n.kind == Kind::Cos ? std::cos(a.constant_value()) : std::sin(a.constant_value()));
      }
      return n.kind == Kind::Cos ? cos(a) : sin(a);
    }
    case Kind::AbsDiff: {
      Expr a = n.children[0].simplified();
      Expr b = n.children[1].simplified();
      if (a.kind() == Kind::Constant && b.kind() == Kind::Constant) {
        return constant(std::abs(a.constant_value() - b.constant_value()));
      }
      return abs_diff(a, b);
    }
  }
  return *this;
}

Expr Expr::substituted(VarIndex from, const Expr& to) const {
  const Node& n = *node_;
  if (n.kind == Kind::Var) return n.var == from ? to : *this;
  if (n.children.empty()) return *this;
  Node copy = n;
  for (auto& c : copy.children) c = c.substituted(from, to);
  return Expr(std::make_shared<const Node>(std::move(copy)));
}

namespace {

std::string format_number(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

std::string Expr::to_string(const std::function<std::string(VarIndex)>& name) const {
  const Node& n = *node_;
  auto wrap = [&](const char* op) {
    std::string s = "(";
    s += op;
    for (const auto& c : n.children) s += " " + c.to_string(name);
    if (n.kind == Kind::Power) s += " " + std::to_string(n.exponent);
    return s + ")";
  };
  switch (n.kind) {
    case Kind::Constant: return format_number(n.value);
    case Kind::Var: return name ? name(n.var) : "v" + std::to_string(n.var);
    case Kind::Sum: return wrap("+");
    case Kind::Product: return wrap("*");
    case Kind::Power: return wrap("^");
    case Kind::Cos: return wrap("cos");
    case Kind::Sin: return wrap("sin");
    case Kind::AbsDiff: return wrap("absdiff");
  }
  return {};
}

Expr operator+(const Expr& a, const Expr& b) { return Expr::sum({a, b}); }
Expr operator*(const Expr& a, const Expr& b) { return Expr::product({a, b}); }
Expr operator*(double c, const Expr& a) { return Expr::product({Expr::constant(c), a}); }
Expr operator-(const Expr& a) { return -1.0 * a; }
Expr operator-(const Expr& a, const Expr& b) { return a + (-b); }

std::pair<double, Expr> split_constant(const Expr& e) {
  if (e.kind() == Expr::Kind::Constant) return {e.constant_value(), Expr::constant(1.0)};
  if (e.kind() != Expr::Kind::Product) return {1.0, e};
  double c = 1.0;
  std::vector<Expr> rest;
  for (const auto& f : e.children()) {
    auto [fc, fr] = split_constant(f);
    c *= fc;
    if (fr.kind() == Expr::Kind::Product) {
      for (const auto& g : fr.children()) rest.push_back(g);
    } else if (!(fr.kind() == Expr::Kind::Constant && fr.constant_value() == 1.0)) {
      rest.push_back(fr);
    }
  }
  return {c, Expr::product(std::move(rest))};
}

std::optional<Expr> linear_factor(const Expr& e, VarIndex v) {
  switch (e.kind()) {
    case Expr::Kind::Var:
      if (e.var_index() == v) return Expr::constant(1.0);
      return std::nullopt;
    case Expr::Kind::Product: {
      std::optional<std::size_t> linear_child;
      for (std::size_t k = 0; k < e.children().size(); ++k) {
        if (!e.children()[k].depends_on(v)) continue;
        if (linear_child) return std::nullopt;
        linear_child = k;
      }
      if (!linear_child) return std::nullopt;
      auto g = linear_factor(e.children()[*linear_child], v);
      if (!g) return std::nullopt;
      std::vector<Expr> factors;
      for (std::size_t k = 0; k < e.children().size(); ++k) {
        factors.push_back(k == *linear_child ? *g : e.children()[k]);
      }
      return Expr::product(std::move(factors));
    }
    case Expr::Kind::Sum: {
      std::vector<Expr> parts;
      for (const auto& c : e.children()) {
        auto g = linear_factor(c, v);
        if (!g) return std::nullopt;
        parts.push_back(*g);
      }
      return Expr::sum(std::move(parts));
    }
    case Expr::Kind::Power:
      if (e.exponent() == 1) return linear_factor(e.children()[0], v);
      return std::nullopt;
    default:
      return std::nullopt;
  }
}

namespace {

class Parser {
 public:
  Parser(std::string_view text, const NameResolver& resolve) : text_(text), resolve_(resolve) {}

  Expr parse_all() {
    Expr e = parse();
    skip_space();
    if (pos_ != text_.size()) fail("trailing characters");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw invalid_input("expression parse error at offset " + std::to_string(pos_) + ": " + what + " in '" +
                        std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  std::string_view token() {
    skip_space();
    std::size_t start = pos_;
    while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != '(' &&
           text_[pos_] != ')') {
      ++pos_;
    }
    if (start == pos_) fail("expected a token");
    return text_.substr(start, pos_ - start);
  }

  Expr atom(std::string_view tok) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc() && ptr == tok.data() + tok.size()) return Expr::constant(v);
    if (tok == "pi") return Expr::constant(std::numbers::pi);
    auto idx = resolve_ ? resolve_(tok) : std::nullopt;
    if (!idx) fail("unknown variable '" + std::string(tok) + "'");
    return Expr::var(*idx);
  }

  Expr parse() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end");
    if (text_[pos_] != '(') return atom(token());
    ++pos_;
    std::string op(token());
    std::vector<Expr> args;
    std::optional<int> exponent;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) fail("missing ')'");
      if (text_[pos_] == ')') {
        ++pos_;
        break;
      }
      if (op == "^" && args.size() == 1) {
        std::string_view tok = token();
        int k = 0;
        auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), k);
        if (ec != std::errc() || ptr != tok.data() + tok.size()) fail("power exponent must be an integer");
        exponent = k;
        continue;
      }
      args.push_back(parse());
    }
    auto arity = [&](std::size_t n) {
      if (args.size() != n) fail("'" + op + "' takes " + std::to_string(n) + " argument(s)");
    };
    if (op == "+") return Expr::sum(std::move(args));
    if (op == "*") return Expr::product(std::move(args));
    if (op == "-") {
      if (args.size() == 1) return -args[0];
      arity(2);
      return args[0] - args[1];
    }
    if (op == "/") {
      arity(2);
      return args[0] * Expr::power(args[1], -1);
    }
    if (op == "^") {
      arity(1);
      if (!exponent) fail("'^' needs an exponent");
      return Expr::power(args[0], *exponent);
    }
    if (op == "cos") {
      arity(1);
      return Expr::cos(args[0]);
    }
    if (op == "sin") {
      arity(1);
      return Expr::sin(args[0]);
    }
    if (op == "absdiff") {
      arity(2);
      return Expr::abs_diff(args[0], args[1]);
    }
    fail("unknown operator '" + op + "'");
  }

  std::string_view text_;
  const NameResolver& resolve_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse_expr(std::string_view text, const NameResolver& resolve) { return Parser(text, resolve).parse_all(); }

ExprTape::ExprTape(const Expr& e) { append(e); }

std::uint32_t ExprTape::append(const Expr& e) {
  std::vector<std::uint32_t> kids;
  for (const auto& c : e.children()) kids.push_back(append(c));
  Op op{e.kind(), e.constant_value(), e.var_index(), e.exponent(), static_cast<std::uint32_t>(children_.size()),
        static_cast<std::uint32_t>(kids.size())};
  children_.insert(children_.end(), kids.begin(), kids.end());
  ops_.push_back(op);
  return static_cast<std::uint32_t>(ops_.size() - 1);
}

bool ExprTape::forward(std::span<const double> values, std::vector<double>& vals) const {
  vals.resize(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    const std::uint32_t* c = children_.data() + op.first_child;
    double v = 0.0;
    switch (op.kind) {
      case Expr::Kind::Constant: v = op.value; break;
      case Expr::Kind::Var:
        if (op.var >= values.size() || std::isnan(values[op.var])) {
          throw EvalError(EvalError::Reason::MissingBinding, "variable v" + std::to_string(op.var) + " is unassigned");
        }
        v = values[op.var];
        break;
      case Expr::Kind::Sum:
        for (std::uint32_t k = 0; k < op.n_children; ++k) v += vals[c[k]];
        break;
      case Expr::Kind::Product:
        v = 1.0;
        for (std::uint32_t k = 0; k < op.n_children; ++k) v *= vals[c[k]];
        break;
      case Expr::Kind::Power:
        if (op.exponent < 0 && vals[c[0]] == 0.0) return false;
        v = int_pow(vals[c[0]], op.exponent);
        break;
      case Expr::Kind::Cos: v = std::cos(vals[c[0]]); break;
      case Expr::Kind::Sin: v = std::sin(vals[c[0]]); break;
      case Expr::Kind::AbsDiff: v = std::abs(vals[c[0]] - vals[c[1]]); break;
    }
    vals[i] = v;
  }
  return true;
}

bool ExprTape::evaluate(std::span<const double> values, double& value) const {
  thread_local std::vector<double> vals;
  if (ops_.empty()) {
    value = 0.0;
    return true;
  }
  if (!forward(values, vals)) return false;
  value = vals.back();
  return true;
}

bool ExprTape::gradient(std::span<const double> values, double& value,
                        std::vector<std::pair<VarIndex, double>>& partials) const {
  thread_local std::vector<double> vals, adj;
  if (ops_.empty()) {
    value = 0.0;
    return true;
  }
  if (!forward(values, vals)) return false;
  value = vals.back();
  adj.assign(ops_.size(), 0.0);
  adj.back() = 1.0;
  for (std::size_t i = ops_.size(); i-- > 0;) {
    const Op& op = ops_[i];
    const double a = adj[i];
    if (a == 0.0) continue;
    const std::uint32_t* c = children_.data() + op.first_child;
    switch (op.kind) {
      case Expr::Kind::Constant: break;
      case Expr::Kind::Var: partials.emplace_back(op.var, a); break;
      case Expr::Kind::Sum:
        for (std::uint32_t k = 0; k < op.n_children; ++k) adj[c[k]] += a;
        break;
      case Expr::Kind::Product:
        for (std::uint32_t k = 0; k < op.n_children; ++k) {
          double others = a;
          for (std::uint32_t j = 0; j < op.n_children; ++j) {
            if (j != k) others *= vals[c[j]];
          }
          adj[c[k]] += others;
        }
        break;
      case Expr::Kind::Power:
        if (op.exponent != 0) adj[c[0]] += a * op.exponent * int_pow(vals[c[0]], op.exponent - 1);
        break;
      case Expr::Kind::Cos: adj[c[0]] -= a * std::sin(vals[c[0]]); break;
      case Expr::Kind::Sin: adj[c[0]] += a * std::cos(vals[c[0]]); break;
      case Expr::Kind::AbsDiff: {
        const double diff = vals[c[0]] - vals[c[1]];
        if (diff == 0.0) break;
        const double sgn = diff > 0.0 ? 1.0 : -1.0;
        adj[c[0]] += sgn * a;
        adj[c[1]] -= sgn * a;
        break;
      }
    }
  }
  return true;
}

}  // namespace aqc
