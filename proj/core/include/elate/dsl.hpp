#pragma once

// Feature-transformation language.
//
// A program is a list of `let` bindings followed by exactly one feature
// declaration:
//
//     # money flow oscillator
//     let clv = ((close - low) - (high - close)) / (high - low)
//     let adl = cumsum(clv * volume, by=symbol)
//     feature "adl_osc": adl - rolling_mean(adl, 3, by=symbol)
//
// Programs only reach the data through a closed set of causal functions, so a
// validated program cannot look ahead in time or touch anything but the frame.

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "elate/data.hpp"

namespace elate::dsl {

enum class ErrorCode {
  SyntaxError,
  UnterminatedString,
  EmptyProgram,
  UnknownColumn,
  UnknownFunction,
  KindMismatch,
  NameCollision,
  NonLiteralWindow,
  SchemaMismatch,
};

std::string_view to_string(ErrorCode code);

struct SourceLocation {
  int line = 0;
  int column = 0;
};

class DslError : public std::runtime_error {
 public:
  DslError(ErrorCode code, std::string message, SourceLocation where = {});

  [[nodiscard]] ErrorCode code() const { return code_; }
  [[nodiscard]] SourceLocation where() const { return where_; }
  /// The offending name for UnknownColumn / UnknownFunction / NameCollision.
  [[nodiscard]] const std::string& subject() const { return subject_; }
  DslError& with_subject(std::string subject) {
    subject_ = std::move(subject);
    return *this;
  }

 private:
  ErrorCode code_;
  SourceLocation where_;
  std::string subject_;
};

enum class BinaryOp { Add, Sub, Mul, Div, Gt, Lt, Ge, Le };

std::string_view symbol(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct ColumnRef {
  std::string name;
};

/// Non-negative numeric literal; the parser turns `-3` into Negate(Constant 3).
struct Constant {
  double value = 0.0;
};

struct Binary {
  BinaryOp op = BinaryOp::Add;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct Negate {
  ExprPtr operand;
};

struct Call {
  std::string function;
  std::vector<ExprPtr> args;
  std::optional<std::string> by;     // categorical grouping column
  std::optional<std::string> level;  // onehot level literal
};

struct Expr {
  std::variant<ColumnRef, Constant, Binary, Negate, Call> node;
  SourceLocation loc;
};

ExprPtr make_column(std::string name, SourceLocation loc = {});
ExprPtr make_constant(double value, SourceLocation loc = {});
ExprPtr make_binary(BinaryOp op, ExprPtr lhs, ExprPtr rhs, SourceLocation loc = {});
ExprPtr make_negate(ExprPtr operand, SourceLocation loc = {});
ExprPtr make_call(std::string function, std::vector<ExprPtr> args,
                  std::optional<std::string> by = std::nullopt,
                  std::optional<std::string> level = std::nullopt, SourceLocation loc = {});

/// Deep comparison that ignores source locations.
bool structurally_equal(const Expr& a, const Expr& b);

struct Binding {
  std::string name;
  ExprPtr expr;
  std::vector<std::string> comments;  // full `# ...` lines preceding the binding
  SourceLocation loc;
};

struct DslProgram {
  std::vector<Binding> bindings;
  std::string feature_name;
  ExprPtr feature_expr;
  std::vector<std::string> feature_comments;
  std::vector<std::string> trailing_comments;
  std::string source_text;

  /// First comment line with the leading `#` stripped; the program's
  /// one-line description of what the feature captures.
  [[nodiscard]] std::optional<std::string> comment() const;
};

/// Structural equality: bindings, feature name, expressions and comments.
/// Source text and locations are ignored.
bool operator==(const DslProgram& a, const DslProgram& b);

enum class ArgKind { Numeric, Window, Categorical, Level };

struct FunctionSignature {
  std::string_view name;
  std::vector<ArgKind> args;
  bool accepts_by = false;
};

/// The closed function whitelist.
const std::vector<FunctionSignature>& function_table();
const FunctionSignature* find_function(std::string_view name);

/// Grammar reference in EBNF with the function list, for docs and prompts.
std::string_view grammar_reference();

DslProgram parse(std::string_view source);

/// Canonical text; parse(format(p)) == p.
std::string format(const DslProgram& program);
std::string format(const Expr& expr);

/// A program that passed validate(). Only validate() creates one.
class ValidatedProgram {
 public:
  [[nodiscard]] const DslProgram& program() const { return program_; }
  [[nodiscard]] const std::string& feature_name() const { return program_.feature_name; }
  /// Frame columns the program reads, with the kind each must have.
  [[nodiscard]] const Schema& requirements() const { return requirements_; }

 private:
  friend ValidatedProgram validate(DslProgram program, const Schema& schema);
  ValidatedProgram(DslProgram program, Schema requirements)
      : program_(std::move(program)), requirements_(std::move(requirements)) {}

  DslProgram program_;
  Schema requirements_;
};

/// Checks column references, kinds, window literals and the function
/// whitelist against `schema`. Throws DslError on rejection.
ValidatedProgram validate(DslProgram program, const Schema& schema);

/// parse + validate.
ValidatedProgram compile(std::string_view source, const Schema& schema);

/// Evaluates the program over every row of `frame`. Numeric problems never
/// throw: they produce NaN. Throws DslError(SchemaMismatch) when the frame
/// lacks a required column.
Series execute(const ValidatedProgram& program, const TimeFrame& frame);

}  // namespace elate::dsl
