#include <algorithm>
#include <charconv>
#include <cmath>

#include "elate/dsl.hpp"

namespace elate::dsl {

namespace {

std::string describe(SourceLocation where, const std::string& message) {
  if (where.line <= 0) return message;
  return "line " + std::to_string(where.line) + ", column " + std::to_string(where.column) + ": " +
         message;
}

// Binding strength; higher binds tighter.
int precedence(const Expr& e) {
  if (const auto* b = std::get_if<Binary>(&e.node)) {
    switch (b->op) {
      case BinaryOp::Gt:
      case BinaryOp::Lt:
      case BinaryOp::Ge:
      case BinaryOp::Le:
        return 1;
      case BinaryOp::Add:
      case BinaryOp::Sub:
        return 2;
      case BinaryOp::Mul:
      case BinaryOp::Div:
        return 3;
    }
  }
  if (std::holds_alternative<Negate>(e.node)) return 4;
  return 5;
}

std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write(const Expr& e, std::string& out);

void write_operand(const Expr& e, int min_prec, std::string& out) {
  if (precedence(e) < min_prec) {
    out.push_back('(');
    write(e, out);
    out.push_back(')');
  } else {
    write(e, out);
  }
}

void write(const Expr& e, std::string& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ColumnRef>) {
          out += n.name;
        } else if constexpr (std::is_same_v<T, Constant>) {
          out += format_number(n.value);
        } else if constexpr (std::is_same_v<T, Binary>) {
          const int p = precedence(e);
          // Comparisons do not chain, and the other operators associate left.
          const bool comparison = p == 1;
          write_operand(*n.lhs, comparison ? p + 1 : p, out);
          out += ' ';
          out += symbol(n.op);
          out += ' ';
          write_operand(*n.rhs, p + 1, out);
        } else if constexpr (std::is_same_v<T, Negate>) {
          out.push_back('-');
          write_operand(*n.operand, 4, out);
        } else {
          out += n.function;
          out.push_back('(');
          for (std::size_t i = 0; i < n.args.size(); ++i) {
            if (i > 0) out += ", ";
            write(*n.args[i], out);
          }
          if (n.level) {
            if (!n.args.empty()) out += ", ";
            out += quote(*n.level);
          }
          if (n.by) {
            if (!n.args.empty() || n.level) out += ", ";
            out += "by=" + *n.by;
          }
          out.push_back(')');
        }
      },
      e.node);
}

}  // namespace

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnterminatedString: return "UnterminatedString";
    case ErrorCode::EmptyProgram: return "EmptyProgram";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::UnknownFunction: return "UnknownFunction";
    case ErrorCode::KindMismatch: return "KindMismatch";
    case ErrorCode::NameCollision: return "NameCollision";
    case ErrorCode::NonLiteralWindow: return "NonLiteralWindow";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  }
  return "DslError";
}

DslError::DslError(ErrorCode code, std::string message, SourceLocation where)
    : std::runtime_error(std::string(to_string(code)) + ": " + describe(where, message)),
      code_(code),
      where_(where) {}

std::string_view symbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Le: return "<=";
  }
  return "?";
}

ExprPtr make_column(std::string name, SourceLocation loc) {
  return std::make_shared<const Expr>(Expr{ColumnRef{std::move(name)}, loc});
}
ExprPtr make_constant(double value, SourceLocation loc) {
  return std::make_shared<const Expr>(Expr{Constant{value}, loc});
}
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourceLocation loc) {
  return std::make_shared<const Expr>(Expr{Binary{op, std::move(lhs), std::move(rhs)}, loc});
}
ExprPtr make_negate(ExprPtr operand, SourceLocation loc) {
  return std::make_shared<const Expr>(Expr{Negate{std::move(operand)}, loc});
}
ExprPtr make_call(std::string function, std::vector<ExprPtr> args, std::optional<std::string> by,
                  std::optional<std::string> level, SourceLocation loc) {
  return std::make_shared<const Expr>(
      Expr{Call{std::move(function), std::move(args), std::move(by), std::move(level)}, loc});
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, ColumnRef>) {
          return x.name == y.name;
        } else if constexpr (std::is_same_v<T, Constant>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Binary>) {
          return x.op == y.op && structurally_equal(*x.lhs, *y.lhs) &&
                 structurally_equal(*x.rhs, *y.rhs);
        } else if constexpr (std::is_same_v<T, Negate>) {
          return structurally_equal(*x.operand, *y.operand);
        } else {
          if (x.function != y.function || x.by != y.by || x.level != y.level ||
              x.args.size() != y.args.size())
            return false;
          for (std::size_t i = 0; i < x.args.size(); ++i) {
            if (!structurally_equal(*x.args[i], *y.args[i])) return false;
          }
          return true;
        }
      },
      a.node);
}

std::optional<std::string> DslProgram::comment() const {
  const std::vector<std::string>* first = nullptr;
  for (const auto& b : bindings) {
    if (!b.comments.empty()) {
      first = &b.comments;
      break;
    }
  }
  if (first == nullptr && !feature_comments.empty()) first = &feature_comments;
  if (first == nullptr && !trailing_comments.empty()) first = &trailing_comments;
  if (first == nullptr) return std::nullopt;
  std::string_view text = first->front();
  text.remove_prefix(std::min<std::size_t>(1, text.size()));
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  return std::string(text);
}

bool operator==(const DslProgram& a, const DslProgram& b) {
  if (a.feature_name != b.feature_name || a.feature_comments != b.feature_comments ||
      a.trailing_comments != b.trailing_comments || a.bindings.size() != b.bindings.size())
    return false;
  if (!a.feature_expr || !b.feature_expr) return a.feature_expr == b.feature_expr;
  if (!structurally_equal(*a.feature_expr, *b.feature_expr)) return false;
  for (std::size_t i = 0; i < a.bindings.size(); ++i) {
    const auto& x = a.bindings[i];
    const auto& y = b.bindings[i];
    if (x.name != y.name || x.comments != y.comments || !structurally_equal(*x.expr, *y.expr))
      return false;
  }
  return true;
}

const std::vector<FunctionSignature>& function_table() {
  using enum ArgKind;
  static const std::vector<FunctionSignature> table = {
      {"lag", {Numeric, Window}, true},
      {"diff", {Numeric, Window}, true},
      {"rolling_mean", {Numeric, Window}, true},
      {"rolling_sum", {Numeric, Window}, true},
      {"rolling_min", {Numeric, Window}, true},
      {"rolling_max", {Numeric, Window}, true},
      {"rolling_std", {Numeric, Window}, true},
      {"cumsum", {Numeric}, true},
      {"abs", {Numeric}, false},
      {"log", {Numeric}, false},
      {"sqrt", {Numeric}, false},
      {"exp", {Numeric}, false},
      {"min", {Numeric, Numeric}, false},
      {"max", {Numeric, Numeric}, false},
      {"onehot", {Categorical, Level}, false},
  };
  return table;
}

const FunctionSignature* find_function(std::string_view name) {
  const auto& table = function_table();
  const auto it = std::find_if(table.begin(), table.end(),
                               [name](const FunctionSignature& f) { return f.name == name; });
  return it == table.end() ? nullptr : &*it;
}

std::string_view grammar_reference() {
  return R"grammar(program    := { comment | binding } feature
binding    := "let" ident "=" expr [";"]
feature    := "feature" string ":" expr [";"]
expr       := additive [ (">" | "<" | ">=" | "<=") additive ]
additive   := term { ("+" | "-") term }
term       := unary { ("*" | "/") unary }
unary      := "-" unary | primary
primary    := number | ident | call | "(" expr ")"
call       := function "(" arguments ")"
comment    := "#" text-to-end-of-line
ident      := letter { letter | digit | "_" }
string     := '"' { character } '"'

Functions (w and k are positive integer literals; `by=<categorical column>`
applies the function separately within each group, in time order):
  lag(e, k, [by=g])            value k steps earlier
  diff(e, k, [by=g])           e - lag(e, k)
  rolling_mean(e, w, [by=g])   mean of the trailing w values (current row included)
  rolling_sum(e, w, [by=g])    sum of the trailing w values
  rolling_min(e, w, [by=g])    minimum of the trailing w values
  rolling_max(e, w, [by=g])    maximum of the trailing w values
  rolling_std(e, w, [by=g])    sample standard deviation of the trailing w values
  cumsum(e, [by=g])            running sum (missing values contribute 0)
  abs(e), log(e), sqrt(e), exp(e)
  min(a, b), max(a, b)         elementwise
  onehot(g, "level")           1 where categorical column g equals "level", else 0

Semantics: windows produce missing values until w observations exist; lag and
diff produce k leading missing values; division by zero, log of a non-positive
value and sqrt of a negative value are missing; comparisons yield 1 or 0.
Categorical columns may only appear in `by=` or as the first onehot argument.
Every feature is causal: row t only uses rows at or before t.)grammar";
}

std::string format(const Expr& expr) {
  std::string out;
  write(expr, out);
  return out;
}

std::string format(const DslProgram& program) {
  std::string out;
  for (const auto& b : program.bindings) {
    for (const auto& c : b.comments) out += c + "\n";
    out += "let " + b.name + " = " + format(*b.expr) + "\n";
  }
  for (const auto& c : program.feature_comments) out += c + "\n";
  out += "feature " + quote(program.feature_name) + ": ";
  if (program.feature_expr) out += format(*program.feature_expr);
  out += "\n";
  for (const auto& c : program.trailing_comments) out += c + "\n";
  return out;
}

}  // namespace elate::dsl
