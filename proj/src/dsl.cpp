#include "hysmc/dsl.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

#include <fmt/format.h>

namespace hysmc {

namespace {

constexpr int kMaxNesting = 500;

struct Token {
  enum class Kind { Ident, Number, Punct, End };

  Kind kind = Kind::End;
  std::string text;
  double number = 0.0;
  SourcePos pos;
};

std::string describe(const Token& t) {
  switch (t.kind) {
    case Token::Kind::End: return "end of input";
    case Token::Kind::Number: return fmt::format("number '{}'", t.text);
    case Token::Kind::Ident: return fmt::format("identifier '{}'", t.text);
    case Token::Kind::Punct: return fmt::format("'{}'", t.text);
  }
  return "?";
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
 public:
  explicit Lexer(std::string_view text) : text_(text) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_space_and_comments();
      Token t;
      t.pos = {line_, col_};
      if (i_ >= text_.size()) {
        out.push_back(t);
        return out;
      }
      char c = text_[i_];
      if (digit(c)) {
        lex_number_or_ident(t);
      } else if (ident_start(c)) {
        t.kind = Token::Kind::Ident;
        size_t start = i_;
        while (i_ < text_.size() && ident_char(text_[i_])) advance();
        t.text = std::string(text_.substr(start, i_ - start));
      } else {
        lex_punct(t);
      }
      out.push_back(std::move(t));
    }
  }

  /// Comment text by line, for unit annotations.
  const std::map<int, std::string>& comments() const { return comments_; }

 private:
  void advance() {
    if (text_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  void skip_space_and_comments() {
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '/' && i_ + 1 < text_.size() && text_[i_ + 1] == '/') {
        int line = line_;
        size_t start = i_ + 2;
        while (i_ < text_.size() && text_[i_] != '\n') advance();
        std::string body(text_.substr(start, i_ - start));
        auto b = body.find_first_not_of(" \t\r");
        auto e = body.find_last_not_of(" \t\r");
        comments_[line] = b == std::string::npos ? "" : body.substr(b, e - b + 1);
      } else {
        break;
      }
    }
  }

  void lex_number_or_ident(Token& t) {
    size_t start = i_;
    size_t j = i_;
    while (j < text_.size() && digit(text_[j])) ++j;
    bool plain_integer = true;
    if (j + 1 < text_.size() && text_[j] == '.' && digit(text_[j + 1])) {
      plain_integer = false;
      ++j;
      while (j < text_.size() && digit(text_[j])) ++j;
    }
    if (j < text_.size() && (text_[j] == 'e' || text_[j] == 'E')) {
      size_t k = j + 1;
      if (k < text_.size() && (text_[k] == '+' || text_[k] == '-')) ++k;
      if (k < text_.size() && digit(text_[k])) {
        plain_integer = false;
        j = k;
        while (j < text_.size() && digit(text_[j])) ++j;
      }
    }
    if (plain_integer && j < text_.size() && ident_char(text_[j])) {
      // Names such as 80_to_20.
      while (j < text_.size() && ident_char(text_[j])) ++j;
      t.kind = Token::Kind::Ident;
    } else {
      t.kind = Token::Kind::Number;
    }
    while (i_ < j) advance();
    t.text = std::string(text_.substr(start, j - start));
    if (t.kind == Token::Kind::Number) {
      auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), t.number);
      if (ec != std::errc() || !std::isfinite(t.number)) {
        throw ParseError(t.pos, fmt::format("number '{}' is out of range", t.text));
      }
    }
  }

  void lex_punct(Token& t) {
    static const char* kTwo[] = {"->", "<=", ">=", "==", "&&", "||", "<>"};
    t.kind = Token::Kind::Punct;
    if (i_ + 1 < text_.size()) {
      for (const char* two : kTwo) {
        if (text_[i_] == two[0] && text_[i_ + 1] == two[1]) {
          t.text = two;
          advance();
          advance();
          return;
        }
      }
    }
    static const std::string kOne = "{}()[];=+-*/<>.,";
    char c = text_[i_];
    if (kOne.find(c) == std::string::npos) {
      unsigned char u = static_cast<unsigned char>(c);
      std::string shown = std::isprint(u) ? fmt::format("'{}'", c) : fmt::format("byte 0x{:02x}", u);
      throw ParseError(t.pos, fmt::format("unexpected character {}", shown));
    }
    t.text = std::string(1, c);
    advance();
  }

  std::string_view text_;
  size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
  std::map<int, std::string> comments_;
};

class Parser {
 public:
  Parser(std::vector<Token> tokens, std::map<int, std::string> comments)
      : toks_(std::move(tokens)), comments_(std::move(comments)) {}

  // --- token helpers -------------------------------------------------------

  const Token& peek(size_t ahead = 0) const {
    size_t k = std::min(i_ + ahead, toks_.size() - 1);
    return toks_[k];
  }

  bool at_punct(std::string_view p, size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Punct && t.text == p;
  }

  bool at_word(std::string_view w, size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Token::Kind::Ident && t.text == w;
  }

  [[noreturn]] void fail(std::vector<std::string> expected) const {
    const Token& t = peek();
    throw ParseError(t.pos, "unexpected " + describe(t), std::move(expected));
  }

  const Token& take() { return toks_[std::min(i_++, toks_.size() - 1)]; }

  const Token& expect_punct(std::string_view p) {
    if (!at_punct(p)) fail({fmt::format("'{}'", p)});
    return take();
  }

  const Token& expect_word(std::string_view w) {
    if (!at_word(w)) fail({fmt::format("'{}'", w)});
    return take();
  }

  const Token& expect_ident(const char* what = "identifier") {
    if (peek().kind != Token::Kind::Ident) fail({what});
    return take();
  }

  double expect_number(bool allow_sign = false) {
    bool negative = false;
    if (allow_sign && at_punct("-")) {
      take();
      negative = true;
    }
    if (peek().kind != Token::Kind::Number) fail({"number"});
    double v = take().number;
    return negative ? -v : v;
  }

  void expect_end() {
    if (peek().kind != Token::Kind::End) fail({"end of input"});
  }

  // --- expressions ---------------------------------------------------------

  Expr expression(const ExpressionOptions& opts) {
    opts_ = &opts;
    depth_ = 0;
    return parse_or();
  }

  // Operator chains deepen the tree as much as parentheses do.
  void deepen(int& extra) {
    ++extra;
    if (++depth_ > kMaxNesting) throw ParseError(peek().pos, "expression nested too deeply");
  }

  struct DepthGuard {
    explicit DepthGuard(Parser& p) : p(p) {
      if (++p.depth_ > kMaxNesting) {
        throw ParseError(p.peek().pos, "expression nested too deeply");
      }
    }
    ~DepthGuard() { --p.depth_; }
    Parser& p;
  };

  Expr parse_or() {
    DepthGuard guard(*this);
    Expr lhs = parse_and();
    int extra = 0;
    while (at_punct("||")) {
      deepen(extra);
      SourcePos pos = take().pos;
      lhs = Expr::binary(BinaryOp::Or, lhs, parse_and(), pos);
    }
    depth_ -= extra;
    return lhs;
  }

  Expr parse_and() {
    Expr lhs = parse_cmp();
    int extra = 0;
    while (at_punct("&&")) {
      deepen(extra);
      SourcePos pos = take().pos;
      lhs = Expr::binary(BinaryOp::And, lhs, parse_cmp(), pos);
    }
    depth_ -= extra;
    return lhs;
  }

  Expr parse_cmp() {
    Expr lhs = parse_additive();
    static const std::pair<const char*, BinaryOp> kOps[] = {
        {"<=", BinaryOp::Le}, {">=", BinaryOp::Ge}, {"<", BinaryOp::Lt},
        {">", BinaryOp::Gt},  {"==", BinaryOp::Eq}};
    for (const auto& [text, op] : kOps) {
      if (at_punct(text)) {
        SourcePos pos = take().pos;
        return Expr::binary(op, lhs, parse_additive(), pos);
      }
    }
    return lhs;
  }

  Expr parse_additive() {
    Expr lhs = parse_term();
    int extra = 0;
    while (at_punct("+") || at_punct("-")) {
      deepen(extra);
      const Token& t = take();
      BinaryOp op = t.text == "+" ? BinaryOp::Add : BinaryOp::Sub;
      lhs = Expr::binary(op, lhs, parse_term(), t.pos);
    }
    depth_ -= extra;
    return lhs;
  }

  // A leading minus negates the whole product: -a*b is -(a*b).
  Expr parse_term() {
    if (at_punct("-")) {
      DepthGuard guard(*this);
      SourcePos pos = take().pos;
      return Expr::unary(UnaryOp::Negate, parse_term(), pos);
    }
    return parse_product();
  }

  Expr parse_product() {
    Expr lhs = parse_factor();
    int extra = 0;
    while (at_punct("*") || at_punct("/")) {
      deepen(extra);
      const Token& t = take();
      BinaryOp op = t.text == "*" ? BinaryOp::Mul : BinaryOp::Div;
      lhs = Expr::binary(op, lhs, parse_factor(), t.pos);
    }
    depth_ -= extra;
    return lhs;
  }

  Expr parse_factor() {
    if (at_punct("-")) {
      DepthGuard guard(*this);
      SourcePos pos = take().pos;
      return Expr::unary(UnaryOp::Negate, parse_factor(), pos);
    }
    return parse_primary();
  }

  Expr parse_primary() {
    const Token& t = peek();
    if (t.kind == Token::Kind::Number) {
      take();
      return Expr::constant(t.number, t.pos);
    }
    if (t.kind == Token::Kind::Punct && t.text == "(") {
      take();
      Expr inner = parse_or();
      expect_punct(")");
      return inner;
    }
    if (t.kind == Token::Kind::Ident) {
      if (t.text == "true" || t.text == "false") {
        take();
        return Expr::boolean(t.text == "true", t.pos);
      }
      if (t.text == "exp") {
        take();
        expect_punct("(");
        Expr arg = parse_or();
        expect_punct(")");
        return Expr::unary(UnaryOp::Exp, arg, t.pos);
      }
      take();
      if (at_punct("(")) {
        throw ParseError(t.pos, fmt::format("unknown function '{}'", t.text), {"'exp'"});
      }
      if (at_punct(".")) {
        if (!opts_->allow_location_atoms) {
          throw ParseError(peek().pos, "location atoms are only allowed in properties");
        }
        take();
        const Token& loc = expect_ident("location name");
        return Expr::location(t.text, loc.text, t.pos);
      }
      if (!opts_->clock_name.empty() && t.text == opts_->clock_name) {
        return Expr::clock(t.text, t.pos);
      }
      return Expr::variable(t.text, t.pos);
    }
    fail({"number", "identifier", "'('", "'-'", "'exp'"});
  }

  // --- model ---------------------------------------------------------------

  NetworkModel model() {
    NetworkModel m;
    if (!at_word("network")) fail({"'network'"});
    take();
    m.name = expect_ident("network name").text;
    expect_punct("{");
    for (;;) {
      if (at_word("const") || at_word("var")) {
        m.variables.push_back(var_decl());
      } else if (at_word("channel")) {
        m.channels.push_back(channel_decl());
      } else {
        break;
      }
    }
    if (!at_word("automaton")) fail({"'const'", "'var'", "'channel'", "'automaton'"});
    while (at_word("automaton")) m.automata.push_back(automaton());
    if (!at_punct("}")) fail({"'automaton'", "'}'"});
    take();
    expect_end();
    return m;
  }

  std::string unit_comment(int line) const {
    auto it = comments_.find(line);
    return it == comments_.end() ? std::string() : it->second;
  }

  VarDecl var_decl() {
    VarDecl v;
    const Token& kw = take();
    v.pos = kw.pos;
    v.name = expect_ident("variable name").text;
    if (kw.text == "const") {
      v.kind = VarDecl::Kind::Constant;
      expect_punct("=");
    } else {
      expect_word("init");
    }
    v.initial = expect_number(true);
    int line = expect_punct(";").pos.line;
    v.unit = unit_comment(line);
    return v;
  }

  ChannelDecl channel_decl() {
    ChannelDecl c;
    c.pos = take().pos;
    // `urgent` followed by a name is the modifier; a channel may itself be called urgent.
    if (at_word("urgent") && peek(1).kind == Token::Kind::Ident) {
      take();
      c.urgent = true;
    }
    c.name = expect_ident("channel name").text;
    expect_punct(";");
    return c;
  }

  HybridAutomaton automaton() {
    HybridAutomaton a;
    a.pos = take().pos;
    a.name = expect_ident("automaton name").text;
    expect_punct("{");
    if (at_word("clock")) {
      take();
      a.local_clock = expect_ident("clock name").text;
      expect_punct(";");
    }
    ExpressionOptions opts;
    if (a.local_clock) opts.clock_name = *a.local_clock;

    if (!at_word("location")) {
      if (a.local_clock) fail({"'location'"});
      fail({"'clock'", "'location'"});
    }
    SourcePos init_pos;
    while (at_word("location")) {
      bool is_init = false;
      a.locations.push_back(location(opts, is_init));
      if (is_init) {
        if (!a.initial_location.empty()) {
          throw ParseError(a.locations.back().pos,
                           fmt::format("automaton '{}' has two init locations (first at {})",
                                       a.name, to_string(init_pos)));
        }
        a.initial_location = a.locations.back().name;
        init_pos = a.locations.back().pos;
      }
    }
    while (at_word("edge")) a.edges.push_back(edge(opts));
    if (!at_punct("}")) fail({"'location'", "'edge'", "'}'"});
    take();
    if (a.initial_location.empty()) {
      throw ParseError(a.pos, fmt::format("automaton '{}' has no init location", a.name));
    }
    return a;
  }

  Location location(const ExpressionOptions& opts, bool& is_init) {
    Location loc;
    loc.pos = take().pos;
    loc.name = expect_ident("location name").text;
    if (at_word("init")) {
      take();
      is_init = true;
    }
    expect_punct("{");
    while (at_word("d") && at_punct("(", 1)) {
      Flow f;
      f.pos = take().pos;
      expect_punct("(");
      f.variable = expect_ident("variable name").text;
      expect_punct(")");
      expect_punct("=");
      f.rhs = expression(opts);
      if (at_word("while")) {
        take();
        f.gate = expression(opts);
      }
      expect_punct(";");
      loc.flows.push_back(std::move(f));
    }
    if (at_word("invariant")) {
      take();
      loc.invariant = expression(opts);
      expect_punct(";");
    }
    if (at_word("dwell")) {
      take();
      if (at_word("eager")) {
        take();
        loc.dwell = StochasticPolicy::eager();
      } else if (at_word("exponential")) {
        take();
        expect_punct("(");
        loc.dwell = StochasticPolicy::exponential(expect_number());
        expect_punct(")");
      } else {
        fail({"'eager'", "'exponential'"});
      }
      if (at_punct(";")) take();
    }
    if (!at_punct("}")) fail({"'d'", "'invariant'", "'dwell'", "'}'"});
    take();
    return loc;
  }

  Edge edge(const ExpressionOptions& opts) {
    Edge e;
    e.pos = take().pos;
    e.source = expect_ident("source location").text;
    expect_punct("->");
    e.target = expect_ident("target location").text;
    expect_punct("{");
    if (at_word("guard")) {
      take();
      e.guard = expression(opts);
      expect_punct(";");
    }
    if (at_word("emit") || at_word("receive")) {
      bool emit = take().text == "emit";
      std::string channel = expect_ident("channel name").text;
      e.sync = emit ? Sync::emit(channel) : Sync::receive(channel);
      expect_punct(";");
    }
    while (at_word("reset")) {
      take();
      Reset r{expect_ident("reset target").text, Expr::constant(0)};
      expect_punct("=");
      r.value = expression(opts);
      expect_punct(";");
      e.resets.push_back(std::move(r));
    }
    if (at_word("weight")) {
      take();
      e.weight = expect_number();
      expect_punct(";");
    }
    if (!at_punct("}")) fail({"'guard'", "'emit'", "'receive'", "'reset'", "'weight'", "'}'"});
    take();
    return e;
  }

 private:
  std::vector<Token> toks_;
  std::map<int, std::string> comments_;
  size_t i_ = 0;
  const ExpressionOptions* opts_ = nullptr;
  int depth_ = 0;
};

std::string number_text(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

Expr parse_expression(std::string_view text, const ExpressionOptions& options) {
  Lexer lexer(text);
  Parser parser(lexer.run(), {});
  Expr e = parser.expression(options);
  parser.expect_end();
  return e;
}

NetworkModel parse_model(std::string_view text) {
  Lexer lexer(text);
  auto tokens = lexer.run();
  Parser parser(std::move(tokens), lexer.comments());
  NetworkModel m = parser.model();
  auto report = validate_network(m);
  if (!report.ok()) throw ModelError(std::move(report));
  return m;
}

std::string pretty_print(const NetworkModel& model) {
  std::string out = fmt::format("network {} {{\n", model.name);
  for (const auto& v : model.variables) {
    if (v.is_constant()) {
      out += fmt::format("  const {} = {};", v.name, number_text(v.initial));
    } else {
      out += fmt::format("  var {} init {};", v.name, number_text(v.initial));
    }
    if (!v.unit.empty()) out += " // " + v.unit;
    out += "\n";
  }
  for (const auto& c : model.channels) {
    out += fmt::format("  channel {}{};\n", c.urgent ? "urgent " : "", c.name);
  }
  for (const auto& a : model.automata) {
    out += fmt::format("\n  automaton {} {{\n", a.name);
    if (a.local_clock) out += fmt::format("    clock {};\n", *a.local_clock);
    for (const auto& loc : a.locations) {
      out += fmt::format("    location {}{} {{\n", loc.name,
                         loc.name == a.initial_location ? " init" : "");
      for (const auto& f : loc.flows) {
        out += fmt::format("      d({}) = {}", f.variable, to_string(f.rhs));
        if (f.gate) out += " while " + to_string(*f.gate);
        out += ";\n";
      }
      if (loc.invariant) out += fmt::format("      invariant {};\n", to_string(*loc.invariant));
      if (loc.dwell.kind == StochasticPolicy::Kind::Exponential) {
        out += fmt::format("      dwell exponential({})\n", number_text(loc.dwell.rate));
      }
      out += "    }\n";
    }
    for (const auto& e : a.edges) {
      out += fmt::format("    edge {} -> {} {{\n", e.source, e.target);
      if (e.guard) out += fmt::format("      guard {};\n", to_string(*e.guard));
      if (e.sync.kind == SyncKind::Emit) out += fmt::format("      emit {};\n", e.sync.channel);
      if (e.sync.kind == SyncKind::Receive) {
        out += fmt::format("      receive {};\n", e.sync.channel);
      }
      for (const auto& r : e.resets) {
        out += fmt::format("      reset {} = {};\n", r.target, to_string(r.value));
      }
      if (e.weight != 1.0) out += fmt::format("      weight {};\n", number_text(e.weight));
      out += "    }\n";
    }
    out += "  }\n";
  }
  out += "}\n";
  return out;
}

}  // namespace hysmc
