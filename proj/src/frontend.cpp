#include "loopnorm/frontend.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace loopnorm {

namespace {

enum class Tok { Ident, Int, Float, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t line = 1;
  std::size_t col = 1;
  std::size_t end_line = 1;
  std::size_t end_col = 1;
};

class Lexer {
 public:
  Lexer(std::string_view text, std::string file) : text_(text), file_(std::move(file)) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.line = line_;
      t.col = col_;
      if (pos_ >= text_.size()) {
        t.kind = Tok::End;
        t.end_line = line_;
        t.end_col = col_;
        out.push_back(t);
        return out;
      }
      char c = text_[pos_];
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        t.kind = Tok::Ident;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
          t.text += advance();
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else {
        t.kind = Tok::Punct;
        static const char* two[] = {"..", "+=", "-=", "*="};
        bool matched = false;
        for (const char* p : two) {
          if (text_.substr(pos_, 2) == p) {
            t.text += advance();
            t.text += advance();
            matched = true;
            break;
          }
        }
        if (!matched) {
          if (std::string_view("[](){},;:=+-*/@").find(c) == std::string_view::npos) {
            throw ParseError(std::string("unexpected character '") + c + "'",
                             SourceSpan{file_, line_, col_, line_, col_});
          }
          t.text += advance();
        }
      }
      t.end_line = line_;
      t.end_col = col_ > 1 ? col_ - 1 : col_;
      out.push_back(std::move(t));
    }
  }

 private:
  char advance() {
    char c = text_[pos_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_space() {
    while (pos_ < text_.size()) {
      char c = text_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
      } else if (c == '#' || (c == '/' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '/')) {
        while (pos_ < text_.size() && text_[pos_] != '\n') advance();
      } else {
        break;
      }
    }
  }

  bool digit_at(std::size_t p) const {
    return p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]));
  }

  void lex_number(Token& t) {
    t.kind = Tok::Int;
    while (digit_at(pos_)) t.text += advance();
    if (pos_ + 1 < text_.size() && text_[pos_] == '.' && digit_at(pos_ + 1)) {
      t.kind = Tok::Float;
      t.text += advance();
      while (digit_at(pos_)) t.text += advance();
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t q = pos_ + 1;
      if (q < text_.size() && (text_[q] == '+' || text_[q] == '-')) ++q;
      if (digit_at(q)) {
        t.kind = Tok::Float;
        while (pos_ < q) t.text += advance();
        while (digit_at(pos_)) t.text += advance();
      }
    }
  }

  std::string_view text_;
  std::string file_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t col_ = 1;
};

class Parser {
 public:
  Parser(std::vector<Token> toks, std::string file) : toks_(std::move(toks)), file_(std::move(file)) {}

  Program run() {
    while (at_ident("param") || at_ident("array")) {
      if (at_ident("param")) parse_param();
      else parse_array();
    }
    program_.body = parse_stmts(/*until_brace=*/false);
    auto diags = validate(program_);
    if (!diags.empty()) {
      throw ParseError(diags.front().path + ": " + diags.front().message, SourceSpan{file_, 1, 1, 1, 1});
    }
    return std::move(program_);
  }

 private:
  // -- token helpers --------------------------------------------------------
  const Token& peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }
  bool at_punct(std::string_view p, std::size_t k = 0) const {
    return peek(k).kind == Tok::Punct && peek(k).text == p;
  }
  bool at_ident(std::string_view s) const { return peek().kind == Tok::Ident && peek().text == s; }
  const Token& next() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  SourceSpan span_of(const Token& a, const Token& b) const {
    return SourceSpan{file_, a.line, a.col, b.end_line, b.end_col};
  }
  SourceSpan span_of(const Token& t) const { return span_of(t, t); }
  const Token& prev() const { return toks_[pos_ == 0 ? 0 : pos_ - 1]; }

  [[noreturn]] void error(const std::string& msg, const Token& t) const {
    throw ParseError(msg, span_of(t));
  }
  [[noreturn]] void error(const std::string& msg, const Token& a, const Token& b) const {
    throw ParseError(msg, span_of(a, b));
  }

  const Token& expect_punct(std::string_view p) {
    if (!at_punct(p)) {
      const Token& t = peek();
      error("expected '" + std::string(p) + "' but found " + describe(t), t);
    }
    return next();
  }

  const Token& expect_ident(const char* what) {
    if (peek().kind != Tok::Ident) error(std::string("expected ") + what + " but found " + describe(peek()), peek());
    return next();
  }

  std::int64_t expect_int(const char* what) {
    bool neg = false;
    if (at_punct("-")) {
      next();
      neg = true;
    }
    const Token& t = peek();
    if (t.kind != Tok::Int) error(std::string("expected ") + what + " but found " + describe(t), t);
    next();
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) error("integer literal out of range", t);
    return neg ? -v : v;
  }

  static std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of input";
    return "'" + t.text + "'";
  }

  // -- declarations ---------------------------------------------------------
  bool name_taken(const std::string& n) const {
    return program_.find_param(n) || program_.find_array(n) ||
           std::find(scope_.begin(), scope_.end(), n) != scope_.end();
  }

  void parse_param() {
    const Token& kw = next();
    const Token& name = expect_ident("parameter name");
    if (name_taken(name.text)) error("duplicate name '" + name.text + "'", name);
    Parameter p{name.text, std::nullopt};
    if (at_punct("=")) {
      next();
      p.default_value = expect_int("integer default");
    }
    expect_punct(";");
    (void)kw;
    program_.params.push_back(std::move(p));
  }

  void parse_array() {
    next();
    const Token& name = expect_ident("array name");
    if (name_taken(name.text)) error("duplicate name '" + name.text + "'", name);
    ArrayDecl a;
    a.name = name.text;
    expect_punct("[");
    do {
      const Token& t = peek();
      if (t.kind == Tok::Int) {
        std::int64_t n = expect_int("extent");
        if (n < 1) error("extent must be >= 1", t);
        a.dims.push_back(Extent::concrete(n));
      } else if (t.kind == Tok::Ident) {
        next();
        if (!program_.find_param(t.text)) error("extent references undeclared parameter '" + t.text + "'", t);
        a.dims.push_back(Extent::symbolic(t.text));
      } else {
        error("expected extent but found " + describe(t), t);
      }
    } while (at_punct(",") && (next(), true));
    expect_punct("]");
    if (at_punct(":")) {
      next();
      const Token& k = expect_ident("element kind");
      if (k.text == "int") a.kind = ElementKind::Int;
      else if (k.text == "float") a.kind = ElementKind::Float;
      else error("unknown element kind '" + k.text + "'", k);
    }
    expect_punct(";");
    program_.arrays.push_back(std::move(a));
  }

  // -- statements -----------------------------------------------------------
  Body parse_stmts(bool until_brace) {
    Body body;
    while (true) {
      if (until_brace && at_punct("}")) return body;
      if (peek().kind == Tok::End) {
        if (until_brace) error("unexpected end of input, expected '}'", peek());
        return body;
      }
      if (at_ident("param") || at_ident("array"))
        error("declarations must precede statements", peek());
      body.push_back(parse_stmt());
    }
  }

  Node parse_stmt() {
    if (at_punct("@") || at_ident("for")) return parse_loop();
    if (at_ident("call") && peek(1).kind == Tok::Ident && at_punct("(", 2)) return parse_call();
    return parse_comp();
  }

  Node parse_loop() {
    const Token& start = peek();
    bool parallel = false, vectorize = false;
    while (at_punct("@")) {
      next();
      const Token& attr = expect_ident("loop attribute");
      if (attr.text == "parallel") parallel = true;
      else if (attr.text == "vectorize") vectorize = true;
      else error("unknown loop attribute '" + attr.text + "'", attr);
    }
    if (!at_ident("for")) error("expected 'for' but found " + describe(peek()), peek());
    next();
    const Token& it = expect_ident("iterator name");
    if (name_taken(it.text)) error("iterator '" + it.text + "' collides with an existing name", it);
    if (!at_ident("in")) error("expected 'in' but found " + describe(peek()), peek());
    next();
    Loop l;
    l.iter = it.text;
    l.parallel = parallel;
    l.vectorize = vectorize;
    l.lower = parse_affine("bound");
    expect_punct("..");
    l.upper = parse_upper();
    if (at_ident("step")) {
      const Token& st = next();
      std::int64_t step = expect_int("step");
      if (step != 1) error("non-unit step " + std::to_string(step) + " is not supported", st, prev());
    }
    expect_punct("{");
    scope_.push_back(l.iter);
    l.body = parse_stmts(true);
    scope_.pop_back();
    const Token& end = expect_punct("}");
    l.span = span_of(start, end);
    return Node(std::move(l));
  }

  std::vector<BoundTerm> parse_upper() {
    std::vector<BoundTerm> out;
    if (at_ident("min") && at_punct("(", 1)) {
      next();
      next();
      do {
        out.push_back(parse_bound_term());
      } while (at_punct(",") && (next(), true));
      expect_punct(")");
      return out;
    }
    out.push_back(parse_bound_term());
    return out;
  }

  BoundTerm parse_bound_term() {
    if (at_ident("ceildiv") && at_punct("(", 1)) {
      next();
      next();
      BoundTerm t;
      t.expr = parse_affine("bound");
      expect_punct(",");
      const Token& d = peek();
      t.divisor = expect_int("divisor");
      if (t.divisor < 1) error("divisor must be >= 1", d);
      expect_punct(")");
      return t;
    }
    return BoundTerm{parse_affine("bound"), 1};
  }

  Node parse_call() {
    next();
    Call c;
    c.idiom = expect_ident("idiom name").text;
    expect_punct("(");
    if (!at_punct(")")) {
      do {
        const Token& a = expect_ident("array argument");
        if (!program_.find_array(a.text)) error("undeclared array '" + a.text + "'", a);
        c.args.push_back(a.text);
      } while (at_punct(",") && (next(), true));
    }
    expect_punct(")");
    expect_punct("{");
    c.reference = parse_stmts(true);
    expect_punct("}");
    return Node(std::move(c));
  }

  Node parse_comp() {
    const Token& start = peek();
    Computation c;
    if (peek().kind == Tok::Ident && at_punct(":", 1)) {
      c.id = next().text;
      next();
      if (!ids_.insert(c.id).second) error("duplicate computation label '" + c.id + "'", start);
    }
    const Token& arr = expect_ident("array access");
    c.write = parse_access_rest(arr);
    c.write.kind = AccessKind::Write;
    bool compound = false;
    if (at_punct("+=")) {
      compound = true;
    } else if (at_punct("-=") || at_punct("*=")) {
      error("only '=' and '+=' assignments are supported", peek());
    } else if (!at_punct("=")) {
      error("expected '=' or '+=' but found " + describe(peek()), peek());
    }
    next();
    if (compound) {
      Access self = c.write;
      self.kind = AccessKind::Read;
      c.reads.push_back(std::move(self));
    }
    Expr rhs = parse_expr(c);
    c.expr = compound ? Expr::binary(Expr::Op::Add, Expr::read_of(0), std::move(rhs)) : std::move(rhs);
    const Token& end = expect_punct(";");
    if (c.id.empty()) {
      c.id = "S" + std::to_string(comp_count_);
      if (!ids_.insert(c.id).second) error("computation id '" + c.id + "' already used by a label", start);
    }
    ++comp_count_;
    c.span = span_of(start, end);
    return Node(std::move(c));
  }

  Access parse_access_rest(const Token& name) {
    const ArrayDecl* decl = program_.find_array(name.text);
    if (!decl) error("undeclared array '" + name.text + "'", name);
    Access a;
    a.array = name.text;
    expect_punct("[");
    do {
      a.indices.push_back(parse_affine("index"));
    } while (at_punct(",") && (next(), true));
    const Token& close = expect_punct("]");
    if (a.indices.size() != decl->rank()) {
      error("rank mismatch: '" + name.text + "' has rank " + std::to_string(decl->rank()) + " but " +
                std::to_string(a.indices.size()) + " subscripts were given",
            name, close);
    }
    return a;
  }

  // -- affine expressions ---------------------------------------------------
  AffineExpr parse_affine(const char* what) {
    const Token& start = peek();
    AffineExpr e = affine_sum(what, start);
    return e;
  }

  AffineExpr affine_sum(const char* what, const Token& start) {
    AffineExpr e = affine_term(what, start);
    while (at_punct("+") || at_punct("-")) {
      bool minus = next().text == "-";
      AffineExpr t = affine_term(what, start);
      if (minus) e -= t;
      else e += t;
    }
    return e;
  }

  AffineExpr affine_term(const char* what, const Token& start) {
    AffineExpr e = affine_factor(what, start);
    while (at_punct("*") || at_punct("/")) {
      const Token& op = next();
      if (op.text == "/") error(std::string("non-affine ") + what + ": division", start, op);
      AffineExpr f = affine_factor(what, start);
      if (e.is_constant()) {
        f *= e.constant();
        e = f;
      } else if (f.is_constant()) {
        e *= f.constant();
      } else {
        error(std::string("non-affine ") + what, start, prev());
      }
    }
    return e;
  }

  AffineExpr affine_factor(const char* what, const Token& start) {
    const Token& t = peek();
    if (at_punct("-")) {
      next();
      return -affine_factor(what, start);
    }
    if (at_punct("(")) {
      next();
      AffineExpr e = affine_sum(what, start);
      expect_punct(")");
      return e;
    }
    if (t.kind == Tok::Int) return AffineExpr(expect_int("integer"));
    if (t.kind == Tok::Ident) {
      next();
      if (program_.find_array(t.text)) error(std::string("non-affine ") + what + ": array access", start, t);
      if (!is_bound_var(t.text)) error("undeclared name '" + t.text + "'", t);
      return AffineExpr::variable(t.text);
    }
    error(std::string("expected ") + what + " expression but found " + describe(t), t);
  }

  bool is_bound_var(const std::string& n) const {
    return program_.find_param(n) || std::find(scope_.begin(), scope_.end(), n) != scope_.end();
  }

  // -- value expressions ----------------------------------------------------
  Expr parse_expr(Computation& c) {
    Expr e = parse_term(c);
    while (at_punct("+") || at_punct("-")) {
      auto op = next().text == "+" ? Expr::Op::Add : Expr::Op::Sub;
      e = Expr::binary(op, std::move(e), parse_term(c));
    }
    return e;
  }

  Expr parse_term(Computation& c) {
    Expr e = parse_unary(c);
    while (at_punct("*") || at_punct("/")) {
      auto op = next().text == "*" ? Expr::Op::Mul : Expr::Op::Div;
      e = Expr::binary(op, std::move(e), parse_unary(c));
    }
    return e;
  }

  Expr parse_unary(Computation& c) {
    if (at_punct("-")) {
      next();
      const Token& t = peek();
      if (t.kind == Tok::Int) {
        next();
        return Expr::integer(-to_int(t));
      }
      if (t.kind == Tok::Float) {
        next();
        return Expr::floating(-to_double(t));
      }
      return Expr::unary(Expr::Op::Neg, parse_unary(c));
    }
    return parse_primary(c);
  }

  std::int64_t to_int(const Token& t) const {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) error("integer literal out of range", t);
    return v;
  }

  double to_double(const Token& t) const {
    double v = 0;
    auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc()) error("bad float literal", t);
    return v;
  }

  Expr parse_primary(Computation& c) {
    const Token& t = peek();
    if (t.kind == Tok::Int) {
      next();
      return Expr::integer(to_int(t));
    }
    if (t.kind == Tok::Float) {
      next();
      return Expr::floating(to_double(t));
    }
    if (at_punct("(")) {
      next();
      Expr e = parse_expr(c);
      expect_punct(")");
      return e;
    }
    if (t.kind != Tok::Ident) error("expected expression but found " + describe(t), t);
    if ((t.text == "min" || t.text == "max") && at_punct("(", 1)) {
      next();
      next();
      Expr a = parse_expr(c);
      expect_punct(",");
      Expr b = parse_expr(c);
      expect_punct(")");
      return Expr::binary(t.text == "min" ? Expr::Op::Min : Expr::Op::Max, std::move(a), std::move(b));
    }
    if (t.text == "idx" && at_punct("(", 1)) {
      next();
      next();
      AffineExpr a = parse_affine("index value");
      expect_punct(")");
      return Expr::index_of(std::move(a));
    }
    next();
    if (at_punct("[")) {
      Access a = parse_access_rest(t);
      c.reads.push_back(std::move(a));
      return Expr::read_of(c.reads.size() - 1);
    }
    if (program_.find_array(t.text)) error("array '" + t.text + "' used without subscripts", t);
    if (!is_bound_var(t.text)) error("undeclared name '" + t.text + "'", t);
    return Expr::index_of(AffineExpr::variable(t.text));
  }

  std::vector<Token> toks_;
  std::string file_;
  std::size_t pos_ = 0;
  Program program_;
  std::vector<std::string> scope_;
  std::set<std::string> ids_;
  std::size_t comp_count_ = 0;
};

// ---------------------------------------------------------------------------
// printing

class Printer {
 public:
  std::string run(const Program& p) {
    for (const auto& prm : p.params) {
      os_ << "param " << prm.name;
      if (prm.default_value) os_ << " = " << *prm.default_value;
      os_ << ";\n";
    }
    for (const auto& a : p.arrays) {
      os_ << "array " << a.name << "[";
      for (std::size_t k = 0; k < a.dims.size(); ++k) os_ << (k ? ", " : "") << a.dims[k].to_string();
      os_ << "]";
      if (a.kind == ElementKind::Int) os_ << " : int";
      os_ << ";\n";
    }
    if (!p.params.empty() || !p.arrays.empty()) os_ << "\n";
    body(p.body, 0);
    return os_.str();
  }

 private:
  void indent(int depth) {
    for (int k = 0; k < depth; ++k) os_ << "  ";
  }

  static std::string bound_term(const BoundTerm& t) {
    if (t.divisor == 1) return affine_text(t.expr);
    return "ceildiv(" + affine_text(t.expr) + ", " + std::to_string(t.divisor) + ")";
  }

  void body(const Body& b, int depth) {
    for (const auto& n : b) {
      indent(depth);
      if (n.is_loop()) {
        const Loop& l = n.loop();
        if (l.parallel) os_ << "@parallel ";
        if (l.vectorize) os_ << "@vectorize ";
        os_ << "for " << l.iter << " in " << affine_text(l.lower) << "..";
        if (l.upper.size() == 1) {
          os_ << bound_term(l.upper[0]);
        } else {
          os_ << "min(";
          for (std::size_t k = 0; k < l.upper.size(); ++k) os_ << (k ? ", " : "") << bound_term(l.upper[k]);
          os_ << ")";
        }
        os_ << " {\n";
        body(l.body, depth + 1);
        indent(depth);
        os_ << "}\n";
      } else if (n.is_call()) {
        const Call& c = n.call();
        os_ << "call " << c.idiom << "(";
        for (std::size_t k = 0; k < c.args.size(); ++k) os_ << (k ? ", " : "") << c.args[k];
        os_ << ") {\n";
        body(c.reference, depth + 1);
        indent(depth);
        os_ << "}\n";
      } else {
        comp(n.computation());
      }
    }
  }

  static std::string access(const Access& a) {
    std::string s = a.array + "[";
    for (std::size_t k = 0; k < a.indices.size(); ++k) s += (k ? ", " : "") + affine_text(a.indices[k]);
    return s + "]";
  }

  void comp(const Computation& c) {
    if (c.id != "S" + std::to_string(position_)) os_ << c.id << ": ";
    ++position_;
    os_ << access(c.write) << " = " << expr(c, c.expr, 0, false) << ";\n";
  }

  static int prec(const Expr& e) {
    switch (e.op) {
      case Expr::Op::Add:
      case Expr::Op::Sub: return 1;
      case Expr::Op::Mul:
      case Expr::Op::Div: return 2;
      case Expr::Op::Neg: return 3;
      default: return 4;
    }
  }

  static std::string number(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, p);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  }

  std::string expr(const Computation& c, const Expr& e, int parent, bool right) {
    std::string s;
    switch (e.op) {
      case Expr::Op::Int: return std::to_string(e.int_value);
      case Expr::Op::Float: return number(e.float_value);
      case Expr::Op::Read: return access(c.reads.at(e.read));
      case Expr::Op::Index: {
        const auto& t = e.index.terms();
        if (e.index.constant() == 0 && t.size() == 1 && t.begin()->second == 1) return t.begin()->first;
        return "idx(" + affine_text(e.index) + ")";
      }
      case Expr::Op::Min:
      case Expr::Op::Max:
        return std::string(op_symbol(e.op)) + "(" + expr(c, e.args[0], 0, false) + ", " +
               expr(c, e.args[1], 0, false) + ")";
      case Expr::Op::Neg:
        return "-(" + expr(c, e.args[0], 0, false) + ")";
      default:
        break;
    }
    int p = prec(e);
    s = expr(c, e.args[0], p, false) + " " + op_symbol(e.op) + " " + expr(c, e.args[1], p, true);
    if (p < parent || (p == parent && right)) s = "(" + s + ")";
    return s;
  }

  std::ostringstream os_;
  std::size_t position_ = 0;
};

}  // namespace

std::string affine_text(const AffineExpr& e) {
  std::string s;
  bool first = true;
  for (const auto& [name, c] : e.terms()) {
    std::int64_t mag = c < 0 ? -c : c;
    if (c < 0) s += "-";
    else if (!first) s += "+";
    if (mag != 1) s += std::to_string(mag) + "*";
    s += name;
    first = false;
  }
  if (first) return std::to_string(e.constant());
  if (e.constant() > 0) s += "+" + std::to_string(e.constant());
  else if (e.constant() < 0) s += std::to_string(e.constant());
  return s;
}

Program parse(std::string_view text, const std::string& filename) {
  Lexer lexer(text, filename);
  Parser parser(lexer.run(), filename);
  return parser.run();
}

Program parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

std::string pretty_print(const Program& program) { return Printer().run(program); }

}  // namespace loopnorm
