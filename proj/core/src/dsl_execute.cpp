#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>

#include "elate/dsl.hpp"

namespace elate::dsl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double finite_or_nan(double v) { return std::isfinite(v) ? v : kNaN; }

// Row indices of each group, in time order. Rows with a missing key belong to
// no group and stay NaN.
std::vector<std::vector<std::size_t>> groups_of(const std::vector<std::string>& keys) {
  std::map<std::string_view, std::size_t> index;
  std::vector<std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].empty()) continue;
    auto [it, inserted] = index.emplace(keys[i], groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

// Sequence transforms over one contiguous series (a whole column or one group).
Series window_op(std::string_view fn, const Series& x, std::size_t w) {
  const std::size_t n = x.size();
  Series out(n, kNaN);
  if (fn == "lag") {
    for (std::size_t t = w; t < n; ++t) out[t] = x[t - w];
    return out;
  }
  if (fn == "diff") {
    for (std::size_t t = w; t < n; ++t) out[t] = x[t] - x[t - w];
    return out;
  }
  for (std::size_t t = w - 1; t < n; ++t) {
    const std::size_t first = t + 1 - w;
    bool missing = false;
    for (std::size_t i = first; i <= t; ++i) {
      if (std::isnan(x[i])) {
        missing = true;
        break;
      }
    }
    if (missing) continue;
    if (fn == "rolling_sum" || fn == "rolling_mean") {
      double sum = 0.0;
      for (std::size_t i = first; i <= t; ++i) sum += x[i];
      out[t] = fn == "rolling_sum" ? sum : sum / static_cast<double>(w);
    } else if (fn == "rolling_min") {
      double m = x[first];
      for (std::size_t i = first + 1; i <= t; ++i) m = std::min(m, x[i]);
      out[t] = m;
    } else if (fn == "rolling_max") {
      double m = x[first];
      for (std::size_t i = first + 1; i <= t; ++i) m = std::max(m, x[i]);
      out[t] = m;
    } else if (fn == "rolling_std") {
      if (w < 2) continue;
      double sum = 0.0;
      for (std::size_t i = first; i <= t; ++i) sum += x[i];
      const double mean = sum / static_cast<double>(w);
      double ss = 0.0;
      for (std::size_t i = first; i <= t; ++i) ss += (x[i] - mean) * (x[i] - mean);
      out[t] = std::sqrt(ss / static_cast<double>(w - 1));
    }
  }
  return out;
}

Series cumsum(const Series& x) {
  Series out(x.size(), kNaN);
  double acc = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (std::isnan(x[t])) continue;
    acc += x[t];
    out[t] = acc;
  }
  return out;
}

class Interpreter {
 public:
  explicit Interpreter(const TimeFrame& frame) : frame_(frame) {}

  Series run(const DslProgram& prog) {
    for (const auto& b : prog.bindings) env_[b.name] = eval(*b.expr);
    Series out = eval(*prog.feature_expr);
    for (double& v : out) v = finite_or_nan(v);
    return out;
  }

 private:
  Series eval(const Expr& e) {
    return std::visit(
        [&](const auto& n) -> Series {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, ColumnRef>) {
            if (const auto it = env_.find(n.name); it != env_.end()) return it->second;
            return frame_.numeric(n.name);
          } else if constexpr (std::is_same_v<T, Constant>) {
            return Series(frame_.rows(), n.value);
          } else if constexpr (std::is_same_v<T, Binary>) {
            return binary(n.op, eval(*n.lhs), eval(*n.rhs));
          } else if constexpr (std::is_same_v<T, Negate>) {
            Series v = eval(*n.operand);
            for (double& x : v) x = -x;
            return v;
          } else {
            return call(n);
          }
        },
        e.node);
  }

  static Series binary(BinaryOp op, Series a, const Series& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double x = a[i];
      const double y = b[i];
      if (std::isnan(x) || std::isnan(y)) {
        a[i] = kNaN;
        continue;
      }
      double r = kNaN;
      switch (op) {
        case BinaryOp::Add: r = x + y; break;
        case BinaryOp::Sub: r = x - y; break;
        case BinaryOp::Mul: r = x * y; break;
        case BinaryOp::Div: r = y == 0.0 ? kNaN : x / y; break;
        case BinaryOp::Gt: r = x > y ? 1.0 : 0.0; break;
        case BinaryOp::Lt: r = x < y ? 1.0 : 0.0; break;
        case BinaryOp::Ge: r = x >= y ? 1.0 : 0.0; break;
        case BinaryOp::Le: r = x <= y ? 1.0 : 0.0; break;
      }
      a[i] = finite_or_nan(r);
    }
    return a;
  }

  static Series elementwise(std::string_view fn, Series v) {
    for (double& x : v) {
      if (std::isnan(x)) continue;
      if (fn == "abs") x = std::fabs(x);
      else if (fn == "log") x = x > 0.0 ? std::log(x) : kNaN;
      else if (fn == "sqrt") x = x >= 0.0 ? std::sqrt(x) : kNaN;
      else if (fn == "exp") x = finite_or_nan(std::exp(x));
    }
    return v;
  }

  Series sequence(std::string_view fn, const Series& x, std::size_t w,
                  const std::optional<std::string>& by) {
    const auto apply = [&](const Series& s) { return fn == "cumsum" ? cumsum(s) : window_op(fn, s, w); };
    if (!by) return apply(x);
    Series out(x.size(), kNaN);
    for (const auto& rows : groups_of(frame_.column(*by).categorical)) {
      Series part;
      part.reserve(rows.size());
      for (std::size_t r : rows) part.push_back(x[r]);
      const Series res = apply(part);
      for (std::size_t i = 0; i < rows.size(); ++i) out[rows[i]] = res[i];
    }
    return out;
  }

  Series call(const Call& c) {
    const std::string_view fn = c.function;
    if (fn == "onehot") {
      const auto& ref = std::get<ColumnRef>(c.args.at(0)->node);
      const auto& codes = frame_.column(ref.name).categorical;
      Series out(codes.size(), kNaN);
      for (std::size_t i = 0; i < codes.size(); ++i) {
        if (!codes[i].empty()) out[i] = codes[i] == *c.level ? 1.0 : 0.0;
      }
      return out;
    }
    if (fn == "min" || fn == "max") {
      Series a = eval(*c.args.at(0));
      const Series b = eval(*c.args.at(1));
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::isnan(a[i]) || std::isnan(b[i])) a[i] = kNaN;
        else a[i] = fn == "min" ? std::min(a[i], b[i]) : std::max(a[i], b[i]);
      }
      return a;
    }
    if (fn == "abs" || fn == "log" || fn == "sqrt" || fn == "exp") return elementwise(fn, eval(*c.args.at(0)));

    const Series x = eval(*c.args.at(0));
    std::size_t w = 0;
    if (c.args.size() > 1) w = static_cast<std::size_t>(std::get<Constant>(c.args[1]->node).value);
    return sequence(fn, x, w, c.by);
  }

  const TimeFrame& frame_;
  std::unordered_map<std::string, Series> env_;
};

}  // namespace

Series execute(const ValidatedProgram& program, const TimeFrame& frame) {
  for (const auto& [name, kind] : program.requirements()) {
    if (!frame.has_column(name) || name == frame.target_name())
      throw DslError(ErrorCode::SchemaMismatch, "frame has no column '" + name + "'").with_subject(name);
    if (frame.column(name).kind != kind)
      throw DslError(ErrorCode::SchemaMismatch, "column '" + name + "' has a different kind")
          .with_subject(name);
  }
  return Interpreter(frame).run(program.program());
}

}  // namespace elate::dsl
