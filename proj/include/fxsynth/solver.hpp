#pragma once

// Integer solving on top of the exact LP: branch and bound on fractional
// variables, then a lexicographic refinement pass so equal-objective optima
// always come out the same way.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxsynth/constraints.hpp"
#include "fxsynth/simplex.hpp"

namespace fxsynth {

class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

using FormatAssignment = std::map<VarId, long long>;

struct SolveOutcome {
  bool feasible = false;
  FormatAssignment assignment;
  long long objective = 0;
  std::string witness;  // violated constraint family when infeasible
};

struct SolveOptions {
  long long node_budget = 200000;
  bool lex_refine = true;  // off: any optimal point (cheaper, for sweeps)
};

inline bool verify(const FormatAssignment& assignment, const ConstraintSystem& sys) {
  for (const auto& v : sys.variables) {
    auto it = assignment.find(v);
    if (it == assignment.end() || it->second < 0) return false;
  }
  for (const auto& c : sys.constraints)
    if (!c.satisfied(assignment)) return false;
  return true;
}

namespace detail {

inline std::vector<LpRow> to_rows(const ConstraintSystem& sys) {
  std::vector<LpRow> rows;
  rows.reserve(sys.constraints.size());
  for (const auto& c : sys.constraints) {
    LpRow row;
    row.a.assign(sys.variables.size(), Rational{0});
    for (const auto& [v, coef] : c.coeffs) row.a[sys.var_index(v)] = coef;
    row.ge = c.rel == Relation::GE;
    row.rhs = c.rhs;
    rows.push_back(std::move(row));
  }
  return rows;
}

inline bool is_integer(const Rational& q) {
  return boost::multiprecision::denominator(q) == 1;
}

inline BigInt floor_of(const Rational& q) {
  BigInt num = boost::multiprecision::numerator(q);
  BigInt den = boost::multiprecision::denominator(q);
  BigInt d = num / den;
  if (num < 0 && d * den != num) --d;
  return d;
}

inline BigInt ceil_of(const Rational& q) {
  BigInt f = floor_of(q);
  return f * boost::multiprecision::denominator(q) ==
                 boost::multiprecision::numerator(q)
             ? f
             : f + 1;
}

struct IlpResult {
  bool feasible = false;
  std::vector<long long> x;
  Rational objective;
  std::vector<std::size_t> bad_rows;  // from the root LP when infeasible
};

// Branch and bound, depth first, floor branch explored first; the incumbent
// prunes via ceil(lp objective) since every integer point has an integer
// objective here (all cost coefficients are integral).
inline IlpResult solve_ilp(const std::vector<LpRow>& base,
                           const std::vector<Rational>& cost,
                           long long& budget) {
  IlpResult best;
  bool root = true;

  struct Node {
    std::vector<LpRow> extra;
  };
  std::vector<Node> stack{{}};

  while (!stack.empty()) {
    Node node = std::move(stack.back());
    stack.pop_back();
    if (--budget < 0) throw solver_error("solver: node budget exhausted");

    std::vector<LpRow> rows = base;
    rows.insert(rows.end(), node.extra.begin(), node.extra.end());
    LpResult lp = solve_lp(rows, cost);
    if (root) {
      best.bad_rows = lp.bad_rows;
      root = false;
    }
    if (lp.status != LpStatus::Optimal) continue;
    if (best.feasible && Rational{ceil_of(lp.objective)} >= best.objective)
      continue;

    std::size_t frac = cost.size();
    for (std::size_t v = 0; v < cost.size(); ++v)
      if (!is_integer(lp.x[v])) { frac = v; break; }

    if (frac == cost.size()) {
      best.feasible = true;
      best.objective = lp.objective;
      best.x.clear();
      for (const auto& q : lp.x)
        best.x.push_back(static_cast<long long>(floor_of(q)));
      continue;
    }

    LpRow lo, hi;
    lo.a.assign(cost.size(), Rational{0});
    lo.a[frac] = 1;
    lo.ge = false;
    lo.rhs = Rational{floor_of(lp.x[frac])};
    hi = lo;
    hi.ge = true;
    hi.rhs = lo.rhs + 1;

    Node up = node, down = std::move(node);
    up.extra.push_back(std::move(hi));
    down.extra.push_back(std::move(lo));
    stack.push_back(std::move(up));    // explored second
    stack.push_back(std::move(down));  // floor branch first
  }
  return best;
}

inline const std::vector<std::string>& family_order() {
  static const std::vector<std::string> order{
      "C1", "C2", "C3", "C4mul", "C5", "C6", "C7", "C8", "C9", "C10", "C11", "GUARD"};
  return order;
}

// Family named by the violated rows of the phase-1 optimum; falls back to
// dropping families one at a time until the rest becomes satisfiable.
inline std::string infeasibility_witness(const ConstraintSystem& sys,
                                         const std::vector<LpRow>& rows,
                                         const std::vector<Rational>& cost,
                                         const std::vector<std::size_t>& bad_rows) {
  for (const auto& fam : family_order())
    for (std::size_t r : bad_rows)
      if (r < sys.constraints.size() && sys.constraints[r].tag == fam) return fam;

  for (const auto& fam : family_order()) {
    std::vector<LpRow> kept;
    bool dropped = false;
    for (std::size_t r = 0; r < sys.constraints.size(); ++r) {
      if (sys.constraints[r].tag == fam) { dropped = true; continue; }
      kept.push_back(rows[r]);
    }
    if (!dropped) continue;
    if (solve_lp(kept, cost).status == LpStatus::Optimal) return fam;
  }
  return "multiple";
}

}  // namespace detail

// Minimizes the sum of all L, breaking objective ties by the lexicographic
// smallest assignment in variable order.  Every returned assignment is
// re-checked against the system in exact integer arithmetic.
inline SolveOutcome solve(const ConstraintSystem& sys, const SolveOptions& opts = {}) {
  const std::size_t n = sys.variables.size();
  std::vector<LpRow> rows = detail::to_rows(sys);
  std::vector<Rational> cost(n, Rational{1});
  long long budget = opts.node_budget;

  detail::IlpResult base = detail::solve_ilp(rows, cost, budget);
  SolveOutcome out;
  if (!base.feasible) {
    out.witness = detail::infeasibility_witness(sys, rows, cost, base.bad_rows);
    return out;
  }

  std::vector<long long> value = base.x;
  if (opts.lex_refine) {
    // pin the objective, then minimize the variables one by one; each fixed
    // variable is substituted out, so the LPs keep shrinking
    LpRow obj_cap;
    obj_cap.a = cost;
    obj_cap.ge = false;
    obj_cap.rhs = base.objective;
    rows.push_back(obj_cap);

    for (std::size_t v = 0; v < n; ++v) {
      const std::size_t left = n - v;
      std::vector<Rational> unit(left, Rational{0});
      unit[0] = 1;
      detail::IlpResult step = detail::solve_ilp(rows, unit, budget);
      if (!step.feasible)
        throw solver_error("solver: refinement lost feasibility");  // unreachable
      value[v] = step.x[0];
      for (auto& row : rows) {
        row.rhs -= row.a[0] * value[v];
        row.a.erase(row.a.begin());
      }
    }
  }

  out.feasible = true;
  out.objective = 0;
  for (std::size_t v = 0; v < n; ++v) {
    out.assignment[sys.variables[v]] = value[v];
    out.objective += value[v];
  }
  if (!verify(out.assignment, sys))
    throw solver_error("solver: optimal point failed exact verification");
  return out;
}

}  // namespace fxsynth
