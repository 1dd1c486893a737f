#include "mrs/expr.hpp"

#include <cctype>
#include <cstdlib>
#include <cstring>
#include <map>
#include <tuple>

namespace mrs {

namespace {

// Structural key for common-subexpression sharing.  Constants compare by bit
// pattern so 2 and 2.0 collapse but 0.0 and -0.0 stay distinct.
using NodeKey = std::tuple<int, std::uint64_t, int, int, int, int>;

NodeKey key_of(const ExprNode& n) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &n.value, sizeof(bits));
  return {static_cast<int>(n.kind), bits, n.a, n.b, static_cast<int>(n.fn), n.exponent};
}

}  // namespace

class ExprBuilder {
 public:
  int intern(ExprNode n) {
    NodeKey k = key_of(n);
    auto it = index_.find(k);
    if (it != index_.end()) return it->second;
    int id = static_cast<int>(nodes_.size());
    nodes_.push_back(n);
    index_.emplace(k, id);
    return id;
  }

  int constant(double v) {
    ExprNode n{NodeKind::constant};
    n.value = v;
    return intern(n);
  }

  int variable(int idx) {
    ExprNode n{NodeKind::variable};
    n.a = idx;
    return intern(n);
  }

  int binary(NodeKind kind, int a, int b) {
    ExprNode n{kind};
    n.a = a;
    n.b = b;
    return intern(n);
  }

  int unary(NodeKind kind, int a) {
    ExprNode n{kind};
    n.a = a;
    return intern(n);
  }

  int std_fn(StdFn f, int a) {
    ExprNode n{NodeKind::std_fn};
    n.a = a;
    n.fn = f;
    return intern(n);
  }

  int int_pow(int a, int e) {
    ExprNode n{NodeKind::int_pow};
    n.a = a;
    n.exponent = e;
    return intern(n);
  }

  ExprDag finish(int root, int arity) {
    ExprDag d;
    d.nodes_ = std::move(nodes_);
    d.root_ = root;
    d.arity_ = arity;
    return d;
  }

  int max_var_ = -1;

 private:
  std::vector<ExprNode> nodes_;
  std::map<NodeKey, int> index_;
};

namespace {

class Parser {
 public:
  Parser(std::string_view text, ExprBuilder& b) : text_(text), b_(b) {}

  int parse_all() {
    int r = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    return r;
  }

 private:
  int parse_expr() {
    int lhs = parse_term();
    for (;;) {
      skip_ws();
      if (accept('+')) {
        lhs = b_.binary(NodeKind::add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = b_.binary(NodeKind::sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  int parse_term() {
    int lhs = parse_factor();
    for (;;) {
      skip_ws();
      if (accept('*')) {
        lhs = b_.binary(NodeKind::mul, lhs, parse_factor());
      } else if (accept('/')) {
        lhs = b_.binary(NodeKind::div, lhs, parse_factor());
      } else {
        return lhs;
      }
    }
  }

  int parse_factor() {
    skip_ws();
    if (accept('-')) return b_.unary(NodeKind::neg, parse_factor());
    if (accept('+')) return parse_factor();
    return parse_power();
  }

  int parse_power() {
    int base = parse_atom();
    skip_ws();
    if (accept('^')) {
      skip_ws();
      int e = parse_int_literal();
      return b_.int_pow(base, e);
    }
    return base;
  }

  int parse_int_literal() {
    std::size_t start = pos_;
    bool negative = accept('-');
    if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      throw ParseError("expected integer exponent after '^'", start);
    }
    long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > 1000000) throw ParseError("exponent too large", start);
      ++pos_;
    }
    return static_cast<int>(negative ? -v : v);
  }

  int parse_atom() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      int r = parse_expr();
      skip_ws();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return r;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw ParseError(std::string("unexpected character '") + c + "'", pos_);
  }

  int parse_number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw ParseError("malformed number", pos_);
    // Reject strtod having consumed exponent-like suffixes past the view.
    std::size_t consumed = static_cast<std::size_t>(end - begin);
    if (pos_ + consumed > text_.size()) throw ParseError("malformed number", pos_);
    pos_ += consumed;
    return b_.constant(v);
  }

  int parse_ident() {
    std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string name(text_.substr(start, pos_ - start));
    if (name.size() >= 2 && name[0] == 'x' &&
        std::isdigit(static_cast<unsigned char>(name[1]))) {
      int idx = std::atoi(name.c_str() + 1);
      b_.max_var_ = std::max(b_.max_var_, idx);
      return b_.variable(idx);
    }
    if (auto f = std_fn_from_name(name)) {
      skip_ws();
      if (!accept('(')) throw ParseError("expected '(' after function name", pos_);
      int arg = parse_expr();
      skip_ws();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return b_.std_fn(*f, arg);
    }
    throw ParseError("unknown identifier '" + name + "'", start);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  std::string_view text_;
  ExprBuilder& b_;
  std::size_t pos_ = 0;
};

}  // namespace

ExprDag ExprDag::parse(std::string_view text) {
  ExprBuilder b;
  Parser p(text, b);
  int root = p.parse_all();
  return b.finish(root, b.max_var_ + 1);
}

ExprDag ExprDag::parse(std::string_view text, int arity) {
  ExprBuilder b;
  Parser p(text, b);
  int root = p.parse_all();
  if (b.max_var_ + 1 > arity) {
    throw ParseError("expression references variable beyond declared arity", 0);
  }
  return b.finish(root, arity);
}

double ExprDag::eval_real(std::span<const double> x) const {
  std::vector<double> scratch;
  return eval_real(x, scratch);
}

double ExprDag::eval_real(std::span<const double> x, std::vector<double>& s) const {
  if (static_cast<int>(x.size()) < arity_) throw DomainError("point has too few coordinates");
  s.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const ExprNode& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::constant: s[i] = n.value; break;
      case NodeKind::variable: s[i] = x[static_cast<std::size_t>(n.a)]; break;
      case NodeKind::add: s[i] = s[n.a] + s[n.b]; break;
      case NodeKind::sub: s[i] = s[n.a] - s[n.b]; break;
      case NodeKind::mul: s[i] = s[n.a] * s[n.b]; break;
      case NodeKind::div:
        if (s[n.b] == 0.0) throw DomainError("division by zero");
        s[i] = s[n.a] / s[n.b];
        break;
      case NodeKind::neg: s[i] = -s[n.a]; break;
      case NodeKind::std_fn:
        switch (n.fn) {
          case StdFn::exp: s[i] = std::exp(s[n.a]); break;
          case StdFn::log:
            if (s[n.a] <= 0.0) throw DomainError("log of nonpositive value");
            s[i] = std::log(s[n.a]);
            break;
          case StdFn::sqrt:
            if (s[n.a] < 0.0) throw DomainError("sqrt of negative value");
            s[i] = std::sqrt(s[n.a]);
            break;
          case StdFn::sin: s[i] = std::sin(s[n.a]); break;
          case StdFn::cos: s[i] = std::cos(s[n.a]); break;
          case StdFn::tan: s[i] = std::tan(s[n.a]); break;
          case StdFn::atan: s[i] = std::atan(s[n.a]); break;
          case StdFn::abs: s[i] = std::fabs(s[n.a]); break;
        }
        break;
      case NodeKind::int_pow:
        if (n.exponent < 0 && s[n.a] == 0.0) throw DomainError("0 raised to negative power");
        s[i] = std::pow(s[n.a], n.exponent);
        break;
    }
  }
  return s[root_];
}

Interval ExprDag::eval_interval(const Box& x, RoundingMode m) const {
  std::vector<Interval> scratch;
  return eval_interval(x, m, scratch);
}

Interval ExprDag::eval_interval(const Box& x, RoundingMode m, std::vector<Interval>& s) const {
  if (static_cast<int>(x.dim()) < arity_) throw DomainError("box has too few sides");
  s.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const ExprNode& n = nodes_[i];
    switch (n.kind) {
      case NodeKind::constant: s[i] = Interval::point(n.value); break;
      case NodeKind::variable: s[i] = x.side(static_cast<std::size_t>(n.a)); break;
      case NodeKind::add: s[i] = add(s[n.a], s[n.b], m); break;
      case NodeKind::sub: s[i] = sub(s[n.a], s[n.b], m); break;
      case NodeKind::mul: s[i] = mul(s[n.a], s[n.b], m); break;
      case NodeKind::div: s[i] = div(s[n.a], s[n.b], m); break;
      case NodeKind::neg: s[i] = neg(s[n.a]); break;
      case NodeKind::std_fn: s[i] = apply_std(n.fn, s[n.a], m); break;
      case NodeKind::int_pow: s[i] = int_pow(s[n.a], n.exponent, m); break;
    }
  }
  return s[root_];
}

Interval ExprDag::mesh_refine_enclosure(const Box& x, int k, RoundingMode m) const {
  if (k < 1) throw DomainError("subdivision count must be >= 1");
  std::vector<Interval> scratch;
  const std::size_t n = x.dim();
  std::vector<int> idx(n, 0);
  std::vector<Interval> cell(n);
  bool first = true;
  Interval acc;
  for (;;) {
    for (std::size_t d = 0; d < n; ++d) {
      const Interval& s = x.side(d);
      double w = (s.hi - s.lo) / k;
      double lo = (idx[d] == 0) ? s.lo : s.lo + idx[d] * w;
      double hi = (idx[d] == k - 1) ? s.hi : s.lo + (idx[d] + 1) * w;
      if (lo > hi) lo = hi;
      cell[d] = Interval(lo, hi);
    }
    Interval e = eval_interval(Box(cell), m, scratch);
    acc = first ? e : hull(acc, e);
    first = false;
    // odometer over the k^n cells
    std::size_t d = 0;
    while (d < n && ++idx[d] == k) {
      idx[d] = 0;
      ++d;
    }
    if (d == n) break;
  }
  // The true range lies in both the union hull and the whole-box enclosure,
  // so intersecting keeps the refined result nested inside eval_interval(x).
  Interval whole = eval_interval(x, m, scratch);
  if (auto r = intersect(acc, whole)) return *r;
  return acc;
}

}  // namespace mrs
