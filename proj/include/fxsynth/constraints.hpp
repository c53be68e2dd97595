#pragma once

// Integer linear constraint system over the fractional lengths L.
//
// Variables are Lu_{k,i} (neuron outputs, k = 1..m), Lx_{k,i} (neuron inputs,
// k = 0..m-1) and Lw_{k,i,j} (weights of the matrix feeding layer k+1).
// The families:
//   C1..C3    width caps M + L <= T-1 per symbol
//   C4mul     product width M^w + L^w + M^x + L^x <= T-1
//   C5..C7    L >= 0
//   C8        output accuracy: Lu of the last layer >= |ufp(threshold)|
//   C9        forward: Lu_{k,i} <= Lx_{k-1,j} for every input j
//   C10       backward: Lx_{k,i} <= Lu_{k,i}
//   C11       per-neuron accuracy, linearized at the ufp level
//   GUARD     optional per-atom caps on the exponents M - L appearing in the
//             accumulation error, weighted by the downstream gain (see below)
//
// C11 bounds ufp of the local error but exponent terms can cancel between
// atoms, so an assignment satisfying C1..C11 may still exceed the threshold
// empirically.  The GUARD family caps each atom's exponent separately at
// ufp(threshold) minus the log of the worst-case downstream amplification,
// minus a margin delta.  Tight margins can make the system infeasible even
// when C1..C11 alone admit a solution, so the solver retries with shrinking
// delta and reports feasibility from the base system only.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "fxsynth/fixed_point.hpp"
#include "fxsynth/model.hpp"
#include "fxsynth/range_analysis.hpp"
#include "fxsynth/rational.hpp"

namespace fxsynth {

enum class VarKind { Lu, Lx, Lw };

struct VarId {
  VarKind kind = VarKind::Lu;
  int k = 0;
  int i = 0;
  int j = -1;  // only for Lw

  auto tied() const { return std::tie(kind, k, i, j); }
  bool operator==(const VarId& o) const { return tied() == o.tied(); }
  bool operator<(const VarId& o) const { return tied() < o.tied(); }

  std::string name() const {
    switch (kind) {
      case VarKind::Lu: return "Lu_" + std::to_string(k) + "_" + std::to_string(i);
      case VarKind::Lx: return "Lx_" + std::to_string(k) + "_" + std::to_string(i);
      default:
        return "Lw_" + std::to_string(k) + "_" + std::to_string(i) + "_" +
               std::to_string(j);
    }
  }
};

inline VarId var_u(int k, int i) { return {VarKind::Lu, k, i, -1}; }
inline VarId var_x(int k, int i) { return {VarKind::Lx, k, i, -1}; }
inline VarId var_w(int k, int i, int j) { return {VarKind::Lw, k, i, j}; }

enum class Relation { LE, GE };

struct LinConstraint {
  std::map<VarId, long long> coeffs;
  Relation rel = Relation::LE;
  long long rhs = 0;
  std::string tag;

  bool satisfied(const std::map<VarId, long long>& assignment) const {
    long long lhs = 0;
    for (const auto& [v, c] : coeffs) lhs += c * assignment.at(v);
    return rel == Relation::LE ? lhs <= rhs : lhs >= rhs;
  }
};

struct ConstraintSystem {
  std::vector<VarId> variables;  // sorted, defines the lexicographic order
  std::vector<LinConstraint> constraints;

  std::size_t var_index(const VarId& v) const {
    auto it = std::lower_bound(variables.begin(), variables.end(), v);
    if (it == variables.end() || !(*it == v))
      throw std::logic_error("ConstraintSystem: unknown variable " + v.name());
    return static_cast<std::size_t>(it - variables.begin());
  }
};

struct SynthesisConfig {
  double threshold = 0.0;
  int bits = 32;  // T
  AnalysisMode mode = AnalysisMode::Interval;
  MPolicy m_policy = MPolicy::TightInterval;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
};

inline void validate(const SynthesisConfig& cfg) {
  if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0))
    throw std::invalid_argument("config: threshold must be in (0,1]");
  if (cfg.bits != 8 && cfg.bits != 16 && cfg.bits != 32)
    throw std::invalid_argument("config: word size must be 8, 16 or 32");
}

// Worst-case error of one neuron's dot product, Sum_j (2^(Mx_j - Lw_j) +
// 2^(Mw_j - Lx_j)) + n*2^(-Lu) + 2^(-Lu+1), evaluated exactly.
inline Rational theta_bound(const std::vector<FxFormat>& x_fmts,
                            const std::vector<FxFormat>& w_fmts,
                            const FxFormat& u_fmt) {
  if (x_fmts.size() != w_fmts.size())
    throw std::invalid_argument("theta_bound: input/weight arity mismatch");
  const auto n = static_cast<int>(x_fmts.size());
  Rational sum{0};
  for (int j = 0; j < n; ++j) {
    sum += pow2(x_fmts[j].msb - w_fmts[j].frac);
    sum += pow2(w_fmts[j].msb - x_fmts[j].frac);
  }
  sum += Rational{n} * pow2(-u_fmt.frac);
  sum += pow2(-u_fmt.frac + 1);
  return sum;
}

namespace detail {

// max(0, ceil(log2(g))) for g > 0, exact.
inline int ceil_log2_pos(const Rational& g) {
  int e = ufp(g);
  if (g > pow2(e)) ++e;
  return std::max(0, e);
}

// Worst-case amplification of a layer-k output through the remaining layers
// (every activation here is 1-Lipschitz).  g[k][i] for k = 1..m, g[m][i] = 1.
inline std::vector<std::vector<Rational>> downstream_gains(const NetModel& model) {
  const int m = static_cast<int>(model.depth());
  std::vector<std::vector<Rational>> g(m + 1);
  g[m].assign(model.layers.back().width(), Rational{1});
  for (int k = m - 1; k >= 1; --k) {
    const auto& next = model.layers[k];  // matrix feeding layer k+1
    g[k].assign(model.layers[k - 1].width(), Rational{0});
    for (std::size_t i = 0; i < g[k].size(); ++i)
      for (std::size_t i2 = 0; i2 < next.width(); ++i2) {
        Rational w = to_rational(std::fabs(double{next.weights[i2][i]}));
        g[k][i] += w * g[k + 1][i2];
      }
  }
  return g;
}

inline long long ceil_div(long long a, long long b) {
  return a / b + ((a % b != 0 && (a > 0) == (b > 0)) ? 1 : 0);
}

}  // namespace detail

// Builds the base system C1..C11, plus the GUARD family when guard_delta is
// set.  Constraint order is deterministic: by family, then (k, i, j).
inline ConstraintSystem generate(const NetModel& model, const MMap& mm,
                                 const SynthesisConfig& cfg,
                                 std::optional<int> guard_delta = std::nullopt) {
  validate(cfg);
  const int m = static_cast<int>(model.depth());
  const int T = cfg.bits;
  const int ufpthr = ufp(cfg.threshold);  // <= 0 since threshold <= 1

  ConstraintSystem sys;
  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      sys.variables.push_back(var_u(k, i));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      sys.variables.push_back(var_x(k, i));
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.layers[k].width()); ++i)
      for (int j = 0; j < static_cast<int>(model.width(k)); ++j)
        sys.variables.push_back(var_w(k, i, j));
  std::sort(sys.variables.begin(), sys.variables.end());

  auto add = [&sys](std::string tag, std::map<VarId, long long> coeffs,
                    Relation rel, long long rhs) {
    sys.constraints.push_back({std::move(coeffs), rel, rhs, std::move(tag)});
  };

  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      add("C1", {{var_x(k, i), 1}}, Relation::LE, T - 1 - mm.x[k][i]);
  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      add("C2", {{var_u(k, i), 1}}, Relation::LE, T - 1 - mm.u[k - 1][i]);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.layers[k].width()); ++i)
      for (int j = 0; j < static_cast<int>(model.width(k)); ++j)
        add("C3", {{var_w(k, i, j), 1}}, Relation::LE, T - 1 - mm.w[k][i][j]);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.layers[k].width()); ++i)
      for (int j = 0; j < static_cast<int>(model.width(k)); ++j)
        add("C4mul", {{var_w(k, i, j), 1}, {var_x(k, j), 1}}, Relation::LE,
            T - 1 - mm.w[k][i][j] - mm.x[k][j]);

  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      add("C5", {{var_x(k, i), 1}}, Relation::GE, 0);
  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      add("C6", {{var_u(k, i), 1}}, Relation::GE, 0);
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.layers[k].width()); ++i)
      for (int j = 0; j < static_cast<int>(model.width(k)); ++j)
        add("C7", {{var_w(k, i, j), 1}}, Relation::GE, 0);

  for (int i = 0; i < static_cast<int>(model.width(m)); ++i)
    add("C8", {{var_u(m, i), 1}}, Relation::GE, std::llabs(ufpthr));

  for (int k = 1; k <= m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      for (int j = 0; j < static_cast<int>(model.width(k - 1)); ++j)
        add("C9", {{var_u(k, i), 1}, {var_x(k - 1, j), -1}}, Relation::LE, 0);

  for (int k = 1; k < m; ++k)
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
      add("C10", {{var_x(k, i), 1}, {var_u(k, i), -1}}, Relation::LE, 0);

  for (int k = 1; k <= m; ++k) {
    const int n = static_cast<int>(model.width(k - 1));
    for (int i = 0; i < static_cast<int>(model.width(k)); ++i) {
      std::map<VarId, long long> coeffs{{var_u(k, i), ufp(static_cast<double>(n)) + 1}};
      long long rhs = -ufpthr - 1;
      for (int j = 0; j < n; ++j) {
        coeffs[var_x(k - 1, j)] += 1;
        coeffs[var_w(k - 1, i, j)] += 1;
        rhs += mm.x[k - 1][j] + mm.w[k - 1][i][j];
      }
      add("C11", std::move(coeffs), Relation::GE, rhs);
    }
  }

  if (guard_delta) {
    const auto gains = detail::downstream_gains(model);
    for (int k = 1; k <= m; ++k) {
      for (int i = 0; i < static_cast<int>(model.width(k)); ++i) {
        const long long base =
            ufpthr - detail::ceil_log2_pos(gains[k][i]) - *guard_delta;
        for (int j = 0; j < static_cast<int>(model.width(k - 1)); ++j) {
          // the clamp keeps each cap reachable under the C4mul width budget
          const long long mwx = mm.w[k - 1][i][j] + mm.x[k - 1][j];
          const long long cap =
              std::max(base, detail::ceil_div(2 * mwx - (T - 1), 2));
          add("GUARD", {{var_w(k - 1, i, j), 1}}, Relation::GE,
              mm.x[k - 1][j] - cap);
          add("GUARD", {{var_x(k - 1, j), 1}}, Relation::GE,
              mm.w[k - 1][i][j] - cap);
        }
        const long long capu =
            std::max(base, static_cast<long long>(mm.u[k - 1][i]) + 1 - (T - 1));
        add("GUARD", {{var_u(k, i), 1}}, Relation::GE, 1 - capu);
      }
    }
  }

  return sys;
}

// Plain text form: one objective line, then one constraint per line.
inline std::string to_lp_text(const ConstraintSystem& sys) {
  std::ostringstream out;
  out << "min:";
  for (std::size_t n = 0; n < sys.variables.size(); ++n)
    out << (n ? " + " : " ") << sys.variables[n].name();
  out << ";\n";
  for (const auto& c : sys.constraints) {
    out << c.tag << ":";
    bool head = true;
    for (const auto& [v, coef] : c.coeffs) {
      if (coef == 0) continue;
      if (head) {
        out << ' ';
        if (coef < 0) out << "- ";
      } else {
        out << (coef < 0 ? " - " : " + ");
      }
      if (std::llabs(coef) != 1) out << std::llabs(coef) << ' ';
      out << v.name();
      head = false;
    }
    out << (c.rel == Relation::LE ? " <= " : " >= ") << c.rhs << ";\n";
  }
  return out.str();
}

namespace detail {

inline VarId parse_var(const std::string& tok) {
  VarKind kind;
  if (tok.rfind("Lu_", 0) == 0) kind = VarKind::Lu;
  else if (tok.rfind("Lx_", 0) == 0) kind = VarKind::Lx;
  else if (tok.rfind("Lw_", 0) == 0) kind = VarKind::Lw;
  else throw std::runtime_error("lp parse: bad variable '" + tok + "'");
  std::vector<int> parts;
  std::istringstream in(tok.substr(3));
  std::string piece;
  while (std::getline(in, piece, '_')) parts.push_back(std::stoi(piece));
  if (kind == VarKind::Lw) {
    if (parts.size() != 3) throw std::runtime_error("lp parse: bad variable '" + tok + "'");
    return var_w(parts[0], parts[1], parts[2]);
  }
  if (parts.size() != 2) throw std::runtime_error("lp parse: bad variable '" + tok + "'");
  return kind == VarKind::Lu ? var_u(parts[0], parts[1]) : var_x(parts[0], parts[1]);
}

}  // namespace detail

inline ConstraintSystem from_lp_text(const std::string& text) {
  ConstraintSystem sys;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto colon = line.find(':');
    auto semi = line.rfind(';');
    if (colon == std::string::npos || semi == std::string::npos)
      throw std::runtime_error("lp parse: malformed line '" + line + "'");
    std::string head = line.substr(0, colon);
    std::string body = line.substr(colon + 1, semi - colon - 1);
    std::istringstream toks(body);
    if (head == "min") {
      std::string tok;
      while (toks >> tok)
        if (tok != "+") sys.variables.push_back(detail::parse_var(tok));
      std::sort(sys.variables.begin(), sys.variables.end());
      continue;
    }
    LinConstraint c;
    c.tag = head;
    long long sign = 1, pending = 1;
    std::string tok;
    while (toks >> tok) {
      if (tok == "+") { sign = 1; continue; }
      if (tok == "-") { sign = -1; continue; }
      if (tok == "<=" || tok == ">=") {
        c.rel = tok == "<=" ? Relation::LE : Relation::GE;
        toks >> c.rhs;
        break;
      }
      if (std::isdigit(static_cast<unsigned char>(tok[0]))) {
        pending = std::stoll(tok);
        continue;
      }
      c.coeffs[detail::parse_var(tok)] += sign * pending;
      pending = 1;
    }
    sys.constraints.push_back(std::move(c));
  }
  return sys;
}

}  // namespace fxsynth
