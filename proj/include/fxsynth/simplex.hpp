#pragma once

// Two-phase primal simplex over exact rationals.  Dense tableau, Bland's
// rule, so it terminates without any cycling heuristics.  Problem form:
//
//   minimize c.x  subject to  A x <= b (row-wise <= or >=), x >= 0
//
// Sizes here are small (tens of variables, low hundreds of rows), so the
// dense exact arithmetic is the simplest thing that is also trustworthy.

#include <cstddef>
#include <vector>

#include "fxsynth/rational.hpp"

namespace fxsynth {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpRow {
  std::vector<Rational> a;
  bool ge = false;  // true: a.x >= rhs, false: a.x <= rhs
  Rational rhs;
};

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Rational objective;
  std::vector<Rational> x;
  std::vector<std::size_t> bad_rows;  // rows still violated at the phase-1 optimum
};

namespace detail {

class Tableau {
 public:
  // columns: n structural, then one slack per row, then artificials, then rhs
  Tableau(const std::vector<LpRow>& rows, std::size_t n) : n_(n), m_(rows.size()) {
    t_.assign(m_, std::vector<Rational>(n_ + m_ + 1));
    basis_.resize(m_);
    for (std::size_t r = 0; r < m_; ++r) {
      Rational sign{rows[r].ge ? -1 : 1};  // normalize to <=
      for (std::size_t cidx = 0; cidx < n_; ++cidx) t_[r][cidx] = sign * rows[r].a[cidx];
      t_[r][n_ + r] = 1;  // slack
      t_[r].back() = sign * rows[r].rhs;
      if (t_[r].back() < 0) {
        for (auto& v : t_[r]) v = -v;
        // slack now enters with -1; an artificial variable is required
        artificial_rows_.push_back(r);
      }
      basis_[r] = n_ + r;
    }
    for (std::size_t a = 0; a < artificial_rows_.size(); ++a) {
      for (auto& row : t_) row.insert(row.end() - 1, Rational{0});
      std::size_t col = n_ + m_ + a;
      std::size_t r = artificial_rows_[a];
      t_[r][col] = 1;
      basis_[r] = col;
    }
  }

  std::size_t width() const { return t_.empty() ? 0 : t_[0].size() - 1; }
  std::size_t art_begin() const { return n_ + m_; }

  // minimizes obj (length = width()), returns false when unbounded
  bool run(std::vector<Rational> obj, Rational& value, std::size_t col_limit) {
    // reduced costs: z = obj, eliminated against the current basis
    std::vector<Rational> z = std::move(obj);
    Rational zval{0};
    for (std::size_t r = 0; r < m_; ++r) reduce(z, zval, r);

    // steepest reduced cost by default; Bland's rule after a degenerate
    // stretch so cycling cannot happen
    long stalled = 0;
    Rational last_zval = zval;
    for (;;) {
      std::size_t enter = col_limit;
      if (stalled < 64) {
        for (std::size_t cidx = 0; cidx < col_limit; ++cidx)
          if (z[cidx] < 0 && (enter == col_limit || z[cidx] < z[enter])) enter = cidx;
      } else {
        for (std::size_t cidx = 0; cidx < col_limit; ++cidx)
          if (z[cidx] < 0) { enter = cidx; break; }
      }
      if (enter == col_limit) break;

      std::size_t leave = m_;
      Rational best;
      for (std::size_t r = 0; r < m_; ++r) {
        if (t_[r][enter] <= 0) continue;
        Rational ratio = t_[r].back() / t_[r][enter];
        if (leave == m_ || ratio < best ||
            (ratio == best && basis_[r] < basis_[leave])) {
          leave = r;
          best = ratio;
        }
      }
      if (leave == m_) return false;
      pivot(leave, enter);
      reduce(z, zval, leave);
      if (zval == last_zval) ++stalled;
      else { stalled = 0; last_zval = zval; }
    }
    value = -zval;
    return true;
  }

  bool drive_out_artificials() {
    for (std::size_t r = 0; r < m_; ++r) {
      if (basis_[r] < art_begin()) continue;
      if (t_[r].back() != 0) return false;  // positive artificial: infeasible
      std::size_t enter = art_begin();
      for (std::size_t cidx = 0; cidx < art_begin(); ++cidx)
        if (t_[r][cidx] != 0) { enter = cidx; break; }
      if (enter == art_begin()) {
        // redundant row, zero it so it can never pivot again
        for (auto& v : t_[r]) v = 0;
        basis_[r] = art_begin() + m_;  // out of range marker
        continue;
      }
      pivot(r, enter);
    }
    return true;
  }

  // rows whose artificial variable is still basic and positive
  std::vector<std::size_t> violated_rows() const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < m_; ++r)
      if (basis_[r] >= art_begin() && basis_[r] < art_begin() + m_ &&
          t_[r].back() > 0)
        out.push_back(r);
    return out;
  }

  std::vector<Rational> extract(std::size_t n) const {
    std::vector<Rational> x(n, Rational{0});
    for (std::size_t r = 0; r < m_; ++r)
      if (basis_[r] < n) x[basis_[r]] = t_[r].back();
    return x;
  }

 private:
  void pivot(std::size_t row, std::size_t col) {
    Rational p = t_[row][col];
    for (auto& v : t_[row]) v /= p;
    for (std::size_t r = 0; r < m_; ++r) {
      if (r == row || t_[r][col] == 0) continue;
      Rational f = t_[r][col];
      for (std::size_t cidx = 0; cidx < t_[r].size(); ++cidx)
        t_[r][cidx] -= f * t_[row][cidx];
    }
    basis_[row] = col;
  }

  void reduce(std::vector<Rational>& z, Rational& zval, std::size_t r) {
    if (basis_[r] >= z.size() || z[basis_[r]] == 0) return;
    Rational f = z[basis_[r]];
    for (std::size_t cidx = 0; cidx < z.size(); ++cidx) z[cidx] -= f * t_[r][cidx];
    zval -= f * t_[r].back();
  }

  std::size_t n_, m_;
  std::vector<std::vector<Rational>> t_;
  std::vector<std::size_t> basis_;
  std::vector<std::size_t> artificial_rows_;
};

}  // namespace detail

inline LpResult solve_lp(const std::vector<LpRow>& rows,
                         const std::vector<Rational>& cost) {
  const std::size_t n = cost.size();
  detail::Tableau tab(rows, n);
  LpResult res;

  const std::size_t total = tab.width();
  if (total > n + rows.size()) {  // artificials present: phase 1
    std::vector<Rational> phase1(total, Rational{0});
    for (std::size_t cidx = tab.art_begin(); cidx < total; ++cidx) phase1[cidx] = 1;
    Rational v;
    if (!tab.run(std::move(phase1), v, total)) return res;  // cannot happen, defensive
    if (v != 0 || !tab.drive_out_artificials()) {
      res.bad_rows = tab.violated_rows();
      return res;  // infeasible
    }
  }

  std::vector<Rational> obj(total, Rational{0});
  for (std::size_t cidx = 0; cidx < n; ++cidx) obj[cidx] = cost[cidx];
  Rational v;
  if (!tab.run(std::move(obj), v, tab.art_begin())) {
    res.status = LpStatus::Unbounded;
    return res;
  }
  res.status = LpStatus::Optimal;
  res.objective = v;
  res.x = tab.extract(n);
  return res;
}

}  // namespace fxsynth
