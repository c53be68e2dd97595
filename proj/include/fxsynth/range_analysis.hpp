#pragma once

// Worst-case range analysis: determines, for every neuron output, input and
// weight, the integer-part width M needed over the declared input box.
//
// Two modes: sound interval propagation over exact rationals (default), and
// sampling through the float evaluator.  The interval analyzer also tracks
// the running partial sums of each dot product, since the evaluator
// accumulates in the output format and every prefix must fit it.

#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "fxsynth/fixed_point.hpp"
#include "fxsynth/model.hpp"
#include "fxsynth/rational.hpp"

namespace fxsynth {

enum class AnalysisMode { Interval, Sampled };
enum class MPolicy { TightInterval, Structural };

struct NeuronRange {
  Interval pre;      // before activation
  Interval post;     // after activation
  Rational acc_mag;  // bound on |any accumulation prefix|, >= |pre| bound
};

struct RangeReport {
  AnalysisMode mode = AnalysisMode::Interval;
  std::vector<Interval> inputs;                  // feature layer
  std::vector<std::vector<NeuronRange>> layers;  // [k-1][i] for layer k
};

// Per-symbol M values; layer indices follow the constraint variables:
// u and x of layer k, w of the matrix feeding layer k+1.
struct MMap {
  std::vector<std::vector<int>> u;               // [k-1][i], k = 1..m
  std::vector<std::vector<int>> x;               // [k][i],   k = 0..m-1
  std::vector<std::vector<std::vector<int>>> w;  // [k][i][j], k = 0..m-1
};

inline RangeReport analyze_interval(const NetModel& model) {
  RangeReport rep;
  rep.mode = AnalysisMode::Interval;
  for (const auto& [lo, hi] : model.input_range)
    rep.inputs.emplace_back(to_rational(lo), to_rational(hi));

  std::vector<Interval> cur = rep.inputs;
  for (const auto& layer : model.layers) {
    std::vector<NeuronRange> rows;
    std::vector<Interval> next;
    for (std::size_t i = 0; i < layer.width(); ++i) {
      Interval acc = Interval::point(Rational{0});
      Rational mag{0};
      for (std::size_t j = 0; j < cur.size(); ++j) {
        acc = acc + cur[j].scaled(to_rational(layer.weights[i][j]));
        if (acc.mag() > mag) mag = acc.mag();
      }
      acc = acc + Interval::point(to_rational(layer.bias[i]));
      if (acc.mag() > mag) mag = acc.mag();
      NeuronRange nr;
      nr.pre = acc;
      nr.post = layer.activation == Activation::ReLU ? acc.relu() : acc;
      nr.acc_mag = mag;
      next.push_back(nr.post);
      rows.push_back(std::move(nr));
    }
    rep.layers.push_back(std::move(rows));
    cur = std::move(next);
  }
  return rep;
}

inline RangeReport analyze_sampled(const NetModel& model, std::size_t samples,
                                   std::uint64_t seed = 0) {
  if (samples < 1) throw std::invalid_argument("analyze_sampled: samples must be >= 1");
  RangeReport rep;
  rep.mode = AnalysisMode::Sampled;
  for (const auto& [lo, hi] : model.input_range)
    rep.inputs.emplace_back(to_rational(lo), to_rational(hi));

  std::mt19937_64 rng(seed);
  bool first = true;
  for (std::size_t s = 0; s < samples; ++s) {
    std::vector<double> x(model.input_dim);
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      const auto& [lo, hi] = model.input_range[i];
      // corners first, then uniform interior points
      if (s == 0) x[i] = lo;
      else if (s == 1) x[i] = hi;
      else x[i] = std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    auto trace = eval_float_trace(model, x);
    // pre-activation values recomputed per layer for the pre interval
    std::vector<float> cur(x.begin(), x.end());
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
      const auto& layer = model.layers[k];
      if (first) rep.layers.emplace_back(layer.width());
      for (std::size_t i = 0; i < layer.width(); ++i) {
        float acc = 0.0f;
        Rational mag{0};
        for (std::size_t j = 0; j < cur.size(); ++j) {
          acc = acc + layer.weights[i][j] * cur[j];
          Rational a = to_rational(std::fabs(acc));
          if (a > mag) mag = a;
        }
        acc = acc + layer.bias[i];
        {
          Rational a = to_rational(std::fabs(acc));
          if (a > mag) mag = a;
        }
        Rational pre = to_rational(acc);
        Rational post = to_rational(trace[k][i]);
        auto& nr = rep.layers[k][i];
        if (first) {
          nr.pre = Interval::point(pre);
          nr.post = Interval::point(post);
          nr.acc_mag = mag;
        } else {
          nr.pre = nr.pre.hull(Interval::point(pre));
          nr.post = nr.post.hull(Interval::point(post));
          if (mag > nr.acc_mag) nr.acc_mag = mag;
        }
      }
      cur = trace[k];
    }
    first = false;
  }
  return rep;
}

namespace detail {
inline int m_of(const Rational& mag) { return mag > 0 ? ufp(mag) : 0; }
}  // namespace detail

inline MMap assign_M(const RangeReport& rep, const NetModel& model,
                     MPolicy policy = MPolicy::TightInterval) {
  MMap mm;
  const int guard = rep.mode == AnalysisMode::Sampled ? 1 : 0;

  mm.x.emplace_back();
  for (const auto& in : rep.inputs) mm.x.back().push_back(detail::m_of(in.mag()));

  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    const auto& layer = model.layers[k];
    mm.w.emplace_back();
    for (std::size_t i = 0; i < layer.width(); ++i) {
      mm.w.back().emplace_back();
      for (float w : layer.weights[i])
        mm.w.back().back().push_back(w != 0.0f ? ufp(std::fabs(double{w})) : 0);
    }

    mm.u.emplace_back();
    for (std::size_t i = 0; i < layer.width(); ++i) {
      int m;
      if (policy == MPolicy::TightInterval) {
        m = detail::m_of(rep.layers[k][i].acc_mag) + guard;
      } else {
        // structural rule: the product needs M^w + M^x, the running sum one
        // carry bit over the widest term (bias included)
        int worst = 0;
        bool any = false;
        for (std::size_t j = 0; j < layer.weights[i].size(); ++j) {
          if (layer.weights[i][j] == 0.0f) continue;
          worst = std::max(worst, mm.w[k][i][j] + mm.x[k][j]);
          any = true;
        }
        if (layer.bias[i] != 0.0f) {
          worst = std::max(worst, ufp(std::fabs(double{layer.bias[i]})));
          any = true;
        }
        m = any ? worst + 1 : 0;
      }
      mm.u.back().push_back(m);
    }

    if (k + 1 < model.layers.size()) mm.x.push_back(mm.u.back());
  }
  return mm;
}

inline nlohmann::json report_to_json(const RangeReport& rep) {
  nlohmann::json j;
  j["mode"] = rep.mode == AnalysisMode::Interval ? "interval" : "sampled";
  auto ival = [](const Interval& iv) {
    return nlohmann::json{to_double(iv.lo), to_double(iv.hi)};
  };
  auto& inputs = j["inputs"] = nlohmann::json::array();
  for (const auto& in : rep.inputs) inputs.push_back(ival(in));
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& rows : rep.layers) {
    nlohmann::json lj = nlohmann::json::array();
    for (const auto& nr : rows)
      lj.push_back({{"pre", ival(nr.pre)},
                    {"post", ival(nr.post)},
                    {"acc_mag", to_double(nr.acc_mag)}});
    layers.push_back(std::move(lj));
  }
  return j;
}

}  // namespace fxsynth
