#pragma once

// Executable fixed-point semantics of the network under a solved format
// assignment.  The generated C must match this trace mantissa for mantissa,
// so every ordering choice here is deliberate and frozen:
//   * inputs are converted at the widest format the word size allows for
//     their M, then shifted down to the assigned input format,
//   * products are truncated to the accumulator's L immediately,
//   * accumulation runs j = 0..n-1, then the bias,
//   * activation is applied on the accumulator format,
//   * layer outputs are shifted down to the next layer's input format.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "fxsynth/constraints.hpp"
#include "fxsynth/fixed_point.hpp"
#include "fxsynth/model.hpp"
#include "fxsynth/range_analysis.hpp"
#include "fxsynth/solver.hpp"

namespace fxsynth {

// Concrete <M,L> for every symbol of the network.
struct FormatPlan {
  int bits = 32;                                      // word size T
  std::vector<std::vector<FxFormat>> u;               // [k-1][i]
  std::vector<std::vector<FxFormat>> x;               // [k][i]
  std::vector<std::vector<std::vector<FxFormat>>> w;  // [k][i][j]

  static FormatPlan build(const NetModel& model, const MMap& mm,
                          const FormatAssignment& assignment, int bits) {
    FormatPlan p;
    p.bits = bits;
    const int m = static_cast<int>(model.depth());
    for (int k = 1; k <= m; ++k) {
      p.u.emplace_back();
      for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
        p.u.back().push_back(
            {mm.u[k - 1][i], static_cast<int>(assignment.at(var_u(k, i)))});
    }
    for (int k = 0; k < m; ++k) {
      p.x.emplace_back();
      for (int i = 0; i < static_cast<int>(model.width(k)); ++i)
        p.x.back().push_back(
            {mm.x[k][i], static_cast<int>(assignment.at(var_x(k, i)))});
      p.w.emplace_back();
      for (int i = 0; i < static_cast<int>(model.layers[k].width()); ++i) {
        p.w.back().emplace_back();
        for (int j = 0; j < static_cast<int>(model.width(k)); ++j)
          p.w.back().back().push_back(
              {mm.w[k][i][j], static_cast<int>(assignment.at(var_w(k, i, j)))});
      }
    }
    return p;
  }
};

struct FxTrace {
  std::vector<FxNum> inputs;               // at the assigned input formats
  std::vector<std::vector<FxNum>> pre;     // accumulator before activation
  std::vector<std::vector<FxNum>> post;    // neuron outputs u
  bool input_out_of_range = false;         // soundness void, not an error

  const std::vector<FxNum>& outputs() const { return post.back(); }
};

// Widest input conversion format for a given M under word size T; one bit is
// the sign, so M + L + 1 <= T - 1.
inline FxFormat input_conversion_format(int msb, int bits) {
  return {msb, bits - 2 - msb};
}

inline FxNum convert_input(double v, const FxFormat& fmt, int bits,
                           bool* out_of_range) {
  FxFormat wide = input_conversion_format(fmt.msb, bits);
  if (v != 0.0 && ufp(std::fabs(v)) > fmt.msb) {
    if (out_of_range) *out_of_range = true;
    return FxNum::unchecked(scale_trunc(v, fmt.frac), fmt);
  }
  return align(float_to_fixed(v, wide), fmt.frac);
}

inline FxTrace eval_fixed(const NetModel& model, const FormatPlan& plan,
                          const std::vector<double>& in) {
  if (in.size() != model.input_dim)
    throw model_error("eval_fixed: input dimension mismatch");
  FxTrace tr;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!(in[i] >= model.input_range[i].first && in[i] <= model.input_range[i].second))
      tr.input_out_of_range = true;
    tr.inputs.push_back(
        convert_input(in[i], plan.x[0][i], plan.bits, &tr.input_out_of_range));
  }

  std::vector<FxNum> cur = tr.inputs;
  const int m = static_cast<int>(model.depth());
  for (int k = 0; k < m; ++k) {
    const auto& layer = model.layers[k];
    std::vector<FxNum> pre_row, post_row, next;
    for (std::size_t i = 0; i < layer.width(); ++i) {
      const FxFormat acc_fmt = plan.u[k][i];
      FxNum acc;
      for (std::size_t j = 0; j < cur.size(); ++j) {
        const FxFormat& wf = plan.w[k][i][j];
        FxNum wfx{scale_trunc(layer.weights[i][j], wf.frac), wf};
        // keep at least one payload bit; flooring a tiny negative product
        // can produce mantissa -1, which a zero-width format cannot hold
        FxFormat prod_fmt{std::max(wf.msb + cur[j].format().msb + 1, -acc_fmt.frac),
                          acc_fmt.frac};
        FxNum prod = fx_mul(wfx, cur[j], prod_fmt);
        acc = fx_add(acc, prod, acc_fmt);
      }
      const float b = layer.bias[i];
      FxFormat bias_fmt{b != 0.0f ? ufp(std::fabs(double{b})) : 0, acc_fmt.frac};
      acc = fx_add(acc, FxNum{scale_trunc(b, bias_fmt.frac), bias_fmt}, acc_fmt);
      pre_row.push_back(acc);
      FxNum out = layer.activation == Activation::ReLU ? fx_relu(acc) : acc;
      post_row.push_back(out);
      if (k + 1 < m) next.push_back(align(out, plan.x[k + 1][i].frac));
    }
    tr.pre.push_back(std::move(pre_row));
    tr.post.push_back(std::move(post_row));
    cur = std::move(next);
  }
  return tr;
}

inline std::vector<double> abs_error(const NetModel& model, const FormatPlan& plan,
                                     const std::vector<double>& in) {
  auto ff = eval_float(model, in);
  auto tr = eval_fixed(model, plan, in);
  std::vector<double> err;
  for (std::size_t i = 0; i < ff.size(); ++i)
    err.push_back(std::fabs(double{ff[i]} - fixed_to_float(tr.outputs()[i])));
  return err;
}

inline nlohmann::json fxnum_to_json(const FxNum& v) {
  return {{"mantissa", v.mantissa()},
          {"M", v.format().msb},
          {"L", v.format().frac},
          {"value", fixed_to_float(v)}};
}

inline nlohmann::json trace_to_json(const FxTrace& tr) {
  nlohmann::json j;
  j["input_out_of_range"] = tr.input_out_of_range;
  auto& in = j["inputs"] = nlohmann::json::array();
  for (const auto& v : tr.inputs) in.push_back(fxnum_to_json(v));
  auto& layers = j["layers"] = nlohmann::json::array();
  for (std::size_t k = 0; k < tr.post.size(); ++k) {
    nlohmann::json lj = nlohmann::json::array();
    for (std::size_t i = 0; i < tr.post[k].size(); ++i)
      lj.push_back({{"pre", fxnum_to_json(tr.pre[k][i])},
                    {"post", fxnum_to_json(tr.post[k][i])}});
    layers.push_back(std::move(lj));
  }
  auto& out = j["outputs"] = nlohmann::json::array();
  for (const auto& v : tr.outputs()) out.push_back(fxnum_to_json(v));
  return j;
}

}  // namespace fxsynth
