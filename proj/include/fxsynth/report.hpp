#pragma once

// End-to-end pipeline and report assembly: load -> range analysis ->
// constraints -> solve -> verify -> fixed evaluation -> emission data.
//
// Feasibility is always judged on the base constraint system.  When that
// system is satisfiable the solver retries with the GUARD family at margins
// 3, 2, 1, 0 and keeps the first assignment that works; the guards only
// refine the solution, they never flip the verdict.

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxsynth/codegen.hpp"
#include "fxsynth/constraints.hpp"
#include "fxsynth/fixed_eval.hpp"
#include "fxsynth/model.hpp"
#include "fxsynth/range_analysis.hpp"
#include "fxsynth/solver.hpp"

namespace fxsynth {

struct SynthesisResult {
  RangeReport ranges;
  MMap mmap;
  ConstraintSystem system;  // base system; source of the verdict
  SolveOutcome outcome;     // guarded refinement when one was feasible
  int guard_delta = -1;     // margin that produced `outcome`, -1 for none
  FormatPlan plan;          // valid when outcome.feasible
};

inline SynthesisResult synthesize(const NetModel& model, const SynthesisConfig& cfg,
                                  const SolveOptions& opts = {}) {
  validate(cfg);
  SynthesisResult res;
  res.ranges = cfg.mode == AnalysisMode::Interval
                   ? analyze_interval(model)
                   : analyze_sampled(model, cfg.samples, cfg.seed);
  res.mmap = assign_M(res.ranges, model, cfg.m_policy);
  res.system = generate(model, res.mmap, cfg);

  // cheap feasibility-only passes first, lexicographic refinement once at
  // the end on whichever system won
  SolveOptions quick = opts;
  quick.lex_refine = false;
  res.outcome = solve(res.system, quick);
  if (!res.outcome.feasible) return res;

  ConstraintSystem chosen = res.system;
  for (int delta : {3, 2, 1, 0}) {
    ConstraintSystem guarded = generate(model, res.mmap, cfg, delta);
    if (solve(guarded, quick).feasible) {
      chosen = std::move(guarded);
      res.guard_delta = delta;
      break;
    }
  }
  res.outcome = solve(chosen, opts);
  res.plan = FormatPlan::build(model, res.mmap, res.outcome.assignment, cfg.bits);
  return res;
}

// Size accounting over neuron outputs: before = every neuron at T bits,
// after = M + L + 1 per neuron.  The percentage is truncated, not rounded,
// to two decimals.
struct GainReport {
  long long bits_before = 0;
  long long bits_after = 0;
  std::string gain_percent;
};

namespace detail {

inline std::string truncate_percent(long long before, long long saved) {
  long long scaled = saved * 10000 / before;  // percent times 100, truncated
  std::string whole = std::to_string(scaled / 100);
  std::string frac = std::to_string(scaled % 100);
  if (frac.size() < 2) frac.insert(frac.begin(), '0');
  return whole + "." + frac;
}

}  // namespace detail

inline GainReport gain_report(const FormatPlan& plan) {
  GainReport g;
  for (const auto& layer : plan.u)
    for (const auto& f : layer) {
      g.bits_before += plan.bits;
      g.bits_after += f.width();
    }
  g.gain_percent = detail::truncate_percent(g.bits_before, g.bits_before - g.bits_after);
  return g;
}

struct ProbeRow {
  std::string neuron;
  double float_value = 0;
  std::int64_t mantissa = 0;
  FxFormat format;
  double decoded = 0;
  double error = 0;       // output layer only
  bool is_output = false;
};

struct ProbeResult {
  std::vector<double> input;
  std::vector<ProbeRow> rows;
  double max_output_error = 0;
  bool out_of_range = false;
};

inline ProbeResult probe(const NetModel& model, const FormatPlan& plan,
                         const std::vector<double>& x) {
  ProbeResult pr;
  pr.input = x;
  auto ff = eval_float_trace(model, x);
  auto tr = eval_fixed(model, plan, x);
  pr.out_of_range = tr.input_out_of_range;
  const std::size_t m = model.depth();
  for (std::size_t k = 0; k < m; ++k)
    for (std::size_t i = 0; i < tr.post[k].size(); ++i) {
      ProbeRow row;
      row.neuron = "u" + std::to_string(k + 1) + std::to_string(i);
      row.float_value = ff[k][i];
      row.mantissa = tr.post[k][i].mantissa();
      row.format = k + 1 == m ? plan.u[k][i] : tr.post[k][i].format();
      row.decoded = fixed_to_float(tr.post[k][i]);
      row.is_output = k + 1 == m;
      if (row.is_output) {
        row.error = std::fabs(double{row.float_value} - row.decoded);
        pr.max_output_error = std::max(pr.max_output_error, row.error);
      }
      pr.rows.push_back(std::move(row));
    }
  return pr;
}

// corners of the input box, then its center, then any user vectors
inline std::vector<std::vector<double>> default_probes(const NetModel& model) {
  std::vector<std::vector<double>> probes;
  const std::size_t n = model.input_dim;
  if (n <= 8) {  // corner count is 2^n, skip for wide inputs
    for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
      std::vector<double> p(n);
      for (std::size_t i = 0; i < n; ++i)
        p[i] = (mask >> i) & 1 ? model.input_range[i].second
                               : model.input_range[i].first;
      probes.push_back(std::move(p));
    }
  }
  std::vector<double> center(n);
  for (std::size_t i = 0; i < n; ++i)
    center[i] = (model.input_range[i].first + model.input_range[i].second) / 2;
  probes.push_back(std::move(center));
  return probes;
}

struct SynthesisReport {
  bool feasible = false;
  std::string witness;
  long long objective = 0;
  int guard_delta = -1;
  double threshold = 0;
  int bits = 32;
  GainReport gain;
  std::vector<ProbeResult> probes;
  // argmax agreement between float and decoded fixed outputs per probe
  std::size_t agree_count = 0;
  bool all_errors_within_threshold = false;
};

inline SynthesisReport make_report(const NetModel& model, const SynthesisConfig& cfg,
                                   const SynthesisResult& res,
                                   const std::vector<std::vector<double>>& extra_probes) {
  SynthesisReport rep;
  rep.feasible = res.outcome.feasible;
  rep.witness = res.outcome.witness;
  rep.threshold = cfg.threshold;
  rep.bits = cfg.bits;
  if (!rep.feasible) return rep;
  rep.objective = res.outcome.objective;
  rep.guard_delta = res.guard_delta;
  rep.gain = gain_report(res.plan);

  auto probes_in = default_probes(model);
  probes_in.insert(probes_in.end(), extra_probes.begin(), extra_probes.end());
  rep.all_errors_within_threshold = true;
  for (const auto& x : probes_in) {
    ProbeResult pr = probe(model, res.plan, x);
    if (pr.max_output_error > cfg.threshold) rep.all_errors_within_threshold = false;
    std::size_t out_n = model.layers.back().width();
    std::vector<double> fv, dv;
    for (const auto& row : pr.rows)
      if (row.is_output) {
        fv.push_back(row.float_value);
        dv.push_back(row.decoded);
      }
    if (out_n > 0 &&
        std::max_element(fv.begin(), fv.end()) - fv.begin() ==
            std::max_element(dv.begin(), dv.end()) - dv.begin())
      ++rep.agree_count;
    rep.probes.push_back(std::move(pr));
  }
  return rep;
}

inline nlohmann::json report_to_json(const SynthesisReport& rep) {
  nlohmann::json j;
  j["feasible"] = rep.feasible;
  j["threshold"] = rep.threshold;
  j["bits"] = rep.bits;
  if (!rep.feasible) {
    j["witness"] = rep.witness;
    return j;
  }
  j["objective"] = rep.objective;
  j["guard_delta"] = rep.guard_delta;
  j["gain"] = {{"bits_before", rep.gain.bits_before},
               {"bits_after", rep.gain.bits_after},
               {"percent", rep.gain.gain_percent}};
  j["argmax_agreement"] = rep.agree_count;
  j["all_errors_within_threshold"] = rep.all_errors_within_threshold;
  auto& probes = j["probes"] = nlohmann::json::array();
  for (const auto& pr : rep.probes) {
    nlohmann::json pj;
    pj["input"] = pr.input;
    pj["max_output_error"] = pr.max_output_error;
    pj["out_of_range"] = pr.out_of_range;
    auto& rows = pj["neurons"] = nlohmann::json::array();
    for (const auto& row : pr.rows) {
      nlohmann::json rj = {{"neuron", row.neuron},
                           {"float", row.float_value},
                           {"mantissa", row.mantissa},
                           {"M", row.format.msb},
                           {"L", row.format.frac},
                           {"decoded", row.decoded}};
      if (row.is_output) rj["abs_error"] = row.error;
      rows.push_back(std::move(rj));
    }
    probes.push_back(std::move(pj));
  }
  return j;
}

inline std::string report_to_markdown(const SynthesisReport& rep) {
  std::ostringstream out;
  out << "# Synthesis report\n\n";
  out << "threshold: " << rep.threshold << ", word size: " << rep.bits << " bits\n\n";
  if (!rep.feasible) {
    out << "**Infeasible**; violated family: " << rep.witness << "\n";
    return out.str();
  }
  out << "Feasible, objective (total fractional bits): " << rep.objective << "\n\n";
  out << "Neuron sizes: " << rep.gain.bits_before << " -> " << rep.gain.bits_after
      << " bits, gain " << rep.gain.gain_percent << "%\n\n";
  for (const auto& pr : rep.probes) {
    out << "## Probe (";
    for (std::size_t i = 0; i < pr.input.size(); ++i)
      out << (i ? ", " : "") << pr.input[i];
    out << ")\n\n";
    out << "| neuron | float | mantissa | format | decoded | abs error |\n";
    out << "|---|---|---|---|---|---|\n";
    for (const auto& row : pr.rows) {
      out << "| " << row.neuron << " | " << row.float_value << " | " << row.mantissa
          << " | " << row.format.str() << " | " << row.decoded << " | ";
      if (row.is_output) out << row.error;
      out << " |\n";
    }
    out << "\nmax output error: " << pr.max_output_error << "\n\n";
  }
  return out.str();
}

// Feasibility matrix: one row per word size, one column per threshold.
struct SweepResult {
  std::vector<double> thresholds;
  std::vector<int> bits_list;
  std::vector<std::vector<bool>> feasible;  // [bits index][threshold index]
};

inline SweepResult feasibility_sweep(const NetModel& model,
                                     std::vector<double> thresholds,
                                     const std::vector<int>& bits_list,
                                     const SolveOptions& opts = {}) {
  std::sort(thresholds.rbegin(), thresholds.rend());  // loosest first
  SweepResult sw;
  sw.thresholds = thresholds;
  sw.bits_list = bits_list;
  for (int bits : bits_list) {
    std::vector<bool> row;
    for (double thr : thresholds) {
      SynthesisConfig cfg;
      cfg.threshold = thr;
      cfg.bits = bits;
      RangeReport rr = analyze_interval(model);
      MMap mm = assign_M(rr, model);
      SolveOptions quick = opts;
      quick.lex_refine = false;
      SolveOutcome so = solve(generate(model, mm, cfg), quick);
      row.push_back(so.feasible);
    }
    sw.feasible.push_back(std::move(row));
  }
  return sw;
}

inline std::string sweep_to_csv(const SweepResult& sw) {
  std::ostringstream out;
  out << "bits";
  for (double thr : sw.thresholds) out << "," << thr;
  out << "\n";
  for (std::size_t r = 0; r < sw.bits_list.size(); ++r) {
    out << sw.bits_list[r];
    for (bool ok : sw.feasible[r]) out << "," << (ok ? "ok" : "x");
    out << "\n";
  }
  return out.str();
}

}  // namespace fxsynth
