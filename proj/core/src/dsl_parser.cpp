#include <cctype>
#include <charconv>
#include <cmath>
#include <unordered_set>

#include "elate/dsl.hpp"

namespace elate::dsl {

namespace {

enum class Tok {
  Ident,
  Number,
  String,
  Comment,
  LParen,
  RParen,
  Comma,
  Assign,
  Colon,
  Semicolon,
  Plus,
  Minus,
  Star,
  Slash,
  Gt,
  Lt,
  Ge,
  Le,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  double number = 0.0;
  SourceLocation loc;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_space();
      Token t;
      t.loc = {line_, col_};
      if (pos_ >= src_.size()) {
        t.kind = Tok::End;
        out.push_back(std::move(t));
        return out;
      }
      const char c = src_[pos_];
      if (c == '#') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        std::string_view text = src_.substr(start, pos_ - start);
        while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
          text.remove_suffix(1);
        t.kind = Tok::Comment;
        t.text = std::string(text);
      } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
          advance();
        t.kind = Tok::Ident;
        t.text = std::string(src_.substr(start, pos_ - start));
      } else if (std::isdigit(static_cast<unsigned char>(c)) ||
                 (c == '.' && pos_ + 1 < src_.size() &&
                  std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
        lex_number(t);
      } else if (c == '"') {
        lex_string(t);
      } else {
        advance();
        const char next = pos_ < src_.size() ? src_[pos_] : '\0';
        switch (c) {
          case '(': t.kind = Tok::LParen; break;
          case ')': t.kind = Tok::RParen; break;
          case ',': t.kind = Tok::Comma; break;
          case '=': t.kind = Tok::Assign; break;
          case ':': t.kind = Tok::Colon; break;
          case ';': t.kind = Tok::Semicolon; break;
          case '+': t.kind = Tok::Plus; break;
          case '-': t.kind = Tok::Minus; break;
          case '*': t.kind = Tok::Star; break;
          case '/': t.kind = Tok::Slash; break;
          case '>':
            t.kind = next == '=' ? Tok::Ge : Tok::Gt;
            if (next == '=') advance();
            break;
          case '<':
            t.kind = next == '=' ? Tok::Le : Tok::Lt;
            if (next == '=') advance();
            break;
          default:
            throw DslError(ErrorCode::SyntaxError, std::string("unexpected character '") + c + "'",
                           t.loc);
        }
      }
      out.push_back(std::move(t));
    }
  }

 private:
  void advance() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
  }

  void lex_number(Token& t) {
    const std::size_t start = pos_;
    auto digits = [&] {
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
    };
    digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      advance();
      digits();
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t look = pos_ + 1;
      if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
      if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
        while (pos_ < look) advance();
        digits();
      }
    }
    const std::string_view text = src_.substr(start, pos_ - start);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(value))
      throw DslError(ErrorCode::SyntaxError, "malformed number '" + std::string(text) + "'", t.loc);
    t.kind = Tok::Number;
    t.text = std::string(text);
    t.number = value;
  }

  void lex_string(Token& t) {
    advance();  // opening quote
    std::string value;
    while (true) {
      if (pos_ >= src_.size() || src_[pos_] == '\n')
        throw DslError(ErrorCode::UnterminatedString, "string literal is not closed", t.loc);
      const char c = src_[pos_];
      advance();
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ >= src_.size())
          throw DslError(ErrorCode::UnterminatedString, "string literal is not closed", t.loc);
        value.push_back(src_[pos_]);
        advance();
      } else {
        value.push_back(c);
      }
    }
    t.kind = Tok::String;
    t.text = std::move(value);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

std::string_view describe(Tok kind) {
  switch (kind) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::String: return "string";
    case Tok::Comment: return "comment";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::Comma: return "','";
    case Tok::Assign: return "'='";
    case Tok::Colon: return "':'";
    case Tok::Semicolon: return "';'";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Gt: return "'>'";
    case Tok::Lt: return "'<'";
    case Tok::Ge: return "'>='";
    case Tok::Le: return "'<='";
    case Tok::End: return "end of program";
  }
  return "token";
}

bool is_keyword(std::string_view s) { return s == "let" || s == "feature" || s == "by"; }

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

  DslProgram program() {
    DslProgram prog;
    std::unordered_set<std::string> names;
    std::vector<std::string> pending;
    bool have_feature = false;
    bool any_statement = false;

    while (peek().kind != Tok::End) {
      if (peek().kind == Tok::Comment) {
        pending.push_back(next().text);
        continue;
      }
      if (peek().kind == Tok::Semicolon) {
        next();
        continue;
      }
      any_statement = true;
      if (have_feature)
        fail(peek(), "nothing may follow the feature declaration");
      const Token& head = expect(Tok::Ident, "'let' or 'feature'");
      if (head.text == "let") {
        const Token& name = expect(Tok::Ident, "binding name");
        if (is_keyword(name.text)) fail(name, "'" + name.text + "' is reserved");
        if (find_function(name.text) != nullptr)
          fail(name, "binding name '" + name.text + "' shadows a function");
        if (!names.insert(name.text).second) fail(name, "duplicate binding '" + name.text + "'");
        expect(Tok::Assign, "'='");
        Binding b{name.text, expression(), std::move(pending), head.loc};
        pending = take_inline_comments();
        prog.bindings.push_back(std::move(b));
      } else if (head.text == "feature") {
        const Token& name = expect(Tok::String, "feature name string");
        if (name.text.empty()) fail(name, "feature name is empty");
        expect(Tok::Colon, "':'");
        prog.feature_name = name.text;
        prog.feature_comments = std::move(pending);
        pending.clear();
        prog.feature_expr = expression();
        pending = take_inline_comments();
        have_feature = true;
      } else {
        fail(head, "expected 'let' or 'feature', found '" + head.text + "'");
      }
    }
    if (!any_statement) throw DslError(ErrorCode::EmptyProgram, "program has no statements");
    if (!have_feature)
      throw DslError(ErrorCode::SyntaxError, "missing terminal 'feature \"name\": expr' declaration",
                     peek().loc);
    prog.trailing_comments = std::move(pending);
    return prog;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }

  // Comments met while inside a statement are carried over to the next
  // statement as leading comments.
  std::vector<std::string> take_inline_comments() {
    std::vector<std::string> out = std::move(inline_comments_);
    inline_comments_.clear();
    return out;
  }

  void skip_inline_comments() {
    while (peek().kind == Tok::Comment) {
      inline_comments_.push_back(next().text);
    }
  }

  [[noreturn]] void fail(const Token& at, const std::string& message) const {
    throw DslError(ErrorCode::SyntaxError, message, at.loc);
  }

  const Token& expect(Tok kind, std::string_view what) {
    skip_inline_comments();
    if (peek().kind != kind)
      fail(peek(), "expected " + std::string(what) + ", found " + std::string(describe(peek().kind)));
    return next();
  }

  bool accept(Tok kind) {
    skip_inline_comments();
    if (peek().kind != kind) return false;
    next();
    return true;
  }

  ExprPtr expression() {
    ExprPtr lhs = additive();
    skip_inline_comments();
    const Token& t = peek();
    std::optional<BinaryOp> op;
    switch (t.kind) {
      case Tok::Gt: op = BinaryOp::Gt; break;
      case Tok::Lt: op = BinaryOp::Lt; break;
      case Tok::Ge: op = BinaryOp::Ge; break;
      case Tok::Le: op = BinaryOp::Le; break;
      default: break;
    }
    if (!op) return lhs;
    const SourceLocation loc = next().loc;
    ExprPtr rhs = additive();
    skip_inline_comments();
    if (peek().kind == Tok::Gt || peek().kind == Tok::Lt || peek().kind == Tok::Ge ||
        peek().kind == Tok::Le)
      fail(peek(), "comparisons do not chain; add parentheses");
    return make_binary(*op, std::move(lhs), std::move(rhs), loc);
  }

  ExprPtr additive() {
    ExprPtr lhs = term();
    while (true) {
      skip_inline_comments();
      const Tok k = peek().kind;
      if (k != Tok::Plus && k != Tok::Minus) return lhs;
      const SourceLocation loc = next().loc;
      lhs = make_binary(k == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub, std::move(lhs), term(), loc);
    }
  }

  ExprPtr term() {
    ExprPtr lhs = unary();
    while (true) {
      skip_inline_comments();
      const Tok k = peek().kind;
      if (k != Tok::Star && k != Tok::Slash) return lhs;
      const SourceLocation loc = next().loc;
      lhs = make_binary(k == Tok::Star ? BinaryOp::Mul : BinaryOp::Div, std::move(lhs), unary(), loc);
    }
  }

  ExprPtr unary() {
    skip_inline_comments();
    if (peek().kind == Tok::Minus) {
      const SourceLocation loc = next().loc;
      return make_negate(unary(), loc);
    }
    return primary();
  }

  ExprPtr primary() {
    skip_inline_comments();
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Number: {
        next();
        return make_constant(t.number, t.loc);
      }
      case Tok::LParen: {
        next();
        ExprPtr inner = expression();
        expect(Tok::RParen, "')'");
        return inner;
      }
      case Tok::Ident: {
        if (t.text == "let" || t.text == "feature")
          fail(t, "expected an expression, found '" + t.text + "'");
        next();
        skip_inline_comments();
        if (peek().kind == Tok::LParen) return call(t);
        if (t.text == "by") fail(t, "'by' is only valid as by=<column> inside a call");
        return make_column(t.text, t.loc);
      }
      default:
        fail(t, "expected an expression, found " + std::string(describe(t.kind)));
    }
  }

  ExprPtr call(const Token& name) {
    expect(Tok::LParen, "'('");
    const FunctionSignature* sig = find_function(name.text);
    std::vector<ExprPtr> args;
    std::optional<std::string> by;
    std::optional<std::string> level;

    if (!accept(Tok::RParen)) {
      while (true) {
        skip_inline_comments();
        if (peek().kind == Tok::Ident && peek().text == "by" && pos_ + 1 < toks_.size() &&
            toks_[pos_ + 1].kind == Tok::Assign) {
          const Token& by_tok = next();
          next();
          if (by) fail(by_tok, "by= given twice");
          by = expect(Tok::Ident, "grouping column after by=").text;
        } else if (by) {
          fail(peek(), "by= must be the last argument");
        } else if (peek().kind == Tok::String) {
          const Token& s = next();
          if (level) fail(s, "only one string argument is allowed");
          level = s.text;
        } else {
          if (level) fail(peek(), "the string argument must follow the column argument");
          args.push_back(expression());
        }
        if (accept(Tok::RParen)) break;
        expect(Tok::Comma, "',' or ')'");
      }
    }

    if (sig != nullptr) {
      std::size_t want_exprs = 0;
      bool want_level = false;
      for (ArgKind k : sig->args) {
        if (k == ArgKind::Level) want_level = true;
        else ++want_exprs;
      }
      if (args.size() != want_exprs || level.has_value() != want_level) {
        const std::size_t total = sig->args.size();
        fail(name, std::string(sig->name) + " expects " + std::to_string(total) + " argument" +
                       (total == 1 ? "" : "s") + ", got " +
                       std::to_string(args.size() + (level ? 1 : 0)));
      }
      if (by && !sig->accepts_by) fail(name, std::string(sig->name) + " does not accept by=");
    }
    return make_call(name.text, std::move(args), std::move(by), std::move(level), name.loc);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  std::vector<std::string> inline_comments_;
};

}  // namespace

DslProgram parse(std::string_view source) {
  Parser parser(Lexer(source).run());
  DslProgram prog = parser.program();
  prog.source_text = std::string(source);
  return prog;
}

}  // namespace elate::dsl
