#include <cmath>
#include <unordered_set>

#include "elate/dsl.hpp"

namespace elate::dsl {

namespace {

constexpr double kMaxWindow = 1'000'000.0;

class Checker {
 public:
  Checker(const DslProgram& prog, const Schema& schema) : prog_(prog), schema_(schema) {
    for (const auto& b : prog.bindings) all_bindings_.insert(b.name);
  }

  Schema run() {
    for (const auto& b : prog_.bindings) {
      if (schema_.contains(b.name))
        throw DslError(ErrorCode::NameCollision,
                       "binding '" + b.name + "' has the same name as a data column", b.loc)
            .with_subject(b.name);
      numeric(*b.expr);
      scope_.insert(b.name);
    }
    if (schema_.contains(prog_.feature_name))
      throw DslError(ErrorCode::NameCollision,
                     "feature name '" + prog_.feature_name + "' is already a data column")
          .with_subject(prog_.feature_name);
    numeric(*prog_.feature_expr);
    return std::move(required_);
  }

 private:
  const ColumnKind& lookup(const std::string& name, SourceLocation loc) {
    const auto it = schema_.find(name);
    if (it == schema_.end()) {
      const std::string why = all_bindings_.contains(name)
                                  ? "'" + name + "' is used before its binding"
                                  : "no column named '" + name + "'";
      throw DslError(ErrorCode::UnknownColumn, why, loc).with_subject(name);
    }
    required_.emplace(it->first, it->second);
    return it->second;
  }

  void categorical(const std::string& name, SourceLocation loc, std::string_view role) {
    if (lookup(name, loc) != ColumnKind::Categorical)
      throw DslError(ErrorCode::KindMismatch,
                     std::string(role) + " needs a categorical column, '" + name + "' is numeric", loc)
          .with_subject(name);
  }

  static void window(const Expr& e, std::string_view function) {
    const auto* c = std::get_if<Constant>(&e.node);
    if (c == nullptr)
      throw DslError(ErrorCode::NonLiteralWindow,
                     std::string(function) + " window/lag must be an integer literal", e.loc);
    if (c->value < 1.0 || c->value != std::floor(c->value) || c->value > kMaxWindow)
      throw DslError(ErrorCode::NonLiteralWindow,
                     std::string(function) + " window/lag must be a positive integer, got " +
                         format(e),
                     e.loc);
  }

  void numeric(const Expr& e) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ColumnRef>) {
            if (scope_.contains(n.name)) return;
            if (lookup(n.name, e.loc) == ColumnKind::Categorical)
              throw DslError(ErrorCode::KindMismatch,
                             "categorical column '" + n.name +
                                 "' may only be used in by= or onehot()",
                             e.loc)
                  .with_subject(n.name);
          } else if constexpr (std::is_same_v<T, Constant>) {
          } else if constexpr (std::is_same_v<T, Binary>) {
            numeric(*n.lhs);
            numeric(*n.rhs);
          } else if constexpr (std::is_same_v<T, Negate>) {
            numeric(*n.operand);
          } else {
            call(n, e.loc);
          }
        },
        e.node);
  }

  void call(const Call& c, SourceLocation loc) {
    const FunctionSignature* sig = find_function(c.function);
    if (sig == nullptr)
      throw DslError(ErrorCode::UnknownFunction, "'" + c.function + "' is not an allowed function",
                     loc)
          .with_subject(c.function);
    std::size_t arg = 0;
    for (ArgKind kind : sig->args) {
      switch (kind) {
        case ArgKind::Numeric:
          numeric(*c.args.at(arg++));
          break;
        case ArgKind::Window:
          window(*c.args.at(arg++), sig->name);
          break;
        case ArgKind::Categorical: {
          const Expr& a = *c.args.at(arg++);
          const auto* ref = std::get_if<ColumnRef>(&a.node);
          if (ref == nullptr || scope_.contains(ref->name))
            throw DslError(ErrorCode::KindMismatch,
                           std::string(sig->name) + " needs a categorical column name", a.loc);
          categorical(ref->name, a.loc, sig->name);
          break;
        }
        case ArgKind::Level:
          if (!c.level)
            throw DslError(ErrorCode::SyntaxError, std::string(sig->name) + " needs a level string", loc);
          break;
      }
    }
    if (c.by) {
      if (!sig->accepts_by)
        throw DslError(ErrorCode::SyntaxError, std::string(sig->name) + " does not accept by=", loc);
      if (scope_.contains(*c.by))
        throw DslError(ErrorCode::KindMismatch, "by= needs a categorical column, '" + *c.by +
                                                    "' is a numeric binding",
                       loc)
            .with_subject(*c.by);
      categorical(*c.by, loc, "by=");
    }
  }

  const DslProgram& prog_;
  const Schema& schema_;
  std::unordered_set<std::string> scope_;
  std::unordered_set<std::string> all_bindings_;
  Schema required_;
};

}  // namespace

ValidatedProgram validate(DslProgram program, const Schema& schema) {
  if (!program.feature_expr) throw DslError(ErrorCode::EmptyProgram, "program has no feature");
  Schema required = Checker(program, schema).run();
  return ValidatedProgram(std::move(program), std::move(required));
}

ValidatedProgram compile(std::string_view source, const Schema& schema) {
  return validate(parse(source), schema);
}

}  // namespace elate::dsl
