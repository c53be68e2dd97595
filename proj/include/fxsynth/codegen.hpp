#pragma once

// C code emission.  The fixed-point program uses integer arithmetic only and
// replays eval_fixed statement by statement, so compiling and running it
// must reproduce the FxTrace mantissas exactly.  Determinism matters: the
// same model and plan always produce the same bytes.

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxsynth/fixed_eval.hpp"
#include "fxsynth/model.hpp"

namespace fxsynth {

class emit_error : public std::runtime_error {
 public:
  explicit emit_error(const std::string& what) : std::runtime_error(what) {}
};

struct EmitOptions {
  bool argv_inputs = false;  // read input mantissas from the command line
};

namespace detail {

inline const char* storage_type(int bits) {
  switch (bits) {
    case 8: return "int8_t";
    case 16: return "int16_t";
    case 32: return "int32_t";
    default: throw emit_error("emit: unsupported word size");
  }
}

inline std::string fmt_comment(const FxFormat& f) {
  return "<" + std::to_string(f.msb) + "," + std::to_string(f.frac) + ">";
}

inline void check_storage(std::int64_t mantissa, int bits, const std::string& what) {
  const std::int64_t bound = std::int64_t{1} << (bits - 1);
  if (mantissa <= -bound || mantissa >= bound)
    throw emit_error("emit: " + what + " mantissa " + std::to_string(mantissa) +
                     " exceeds " + std::to_string(bits) + "-bit storage");
}

}  // namespace detail

// Integer-only C99 program for the fixed-point network.  `inputs` are the
// real input values baked into the default variant; with argv_inputs the
// program reads raw mantissas (at the documented conversion formats) instead.
inline std::string emit(const NetModel& model, const FormatPlan& plan,
                        const std::vector<double>& inputs,
                        const EmitOptions& opts = {}) {
  if (inputs.size() != model.input_dim)
    throw emit_error("emit: input dimension mismatch");
  const int T = plan.bits;
  const char* ty = detail::storage_type(T);
  const int m = static_cast<int>(model.depth());
  std::ostringstream out;

  out << "/* fixed-point inference, integer arithmetic only */\n"
      << "#include <stdint.h>\n"
      << "#include <stdio.h>\n";
  if (opts.argv_inputs) out << "#include <stdlib.h>\n";
  bool any_relu = false;
  for (const auto& layer : model.layers)
    if (layer.activation == Activation::ReLU) any_relu = true;
  out << "\n"
      << "/* right shift of a negative value must be arithmetic */\n"
      << "typedef char require_arithmetic_shift[((-2 >> 1) == -1) ? 1 : -1];\n"
      << "\n";
  if (any_relu)
    out << "static int64_t max64(int64_t a, int64_t b) { return a > b ? a : b; }\n"
        << "\n";

  out << "static " << ty << " x0[" << model.input_dim << "];\n";
  for (int k = 1; k <= m; ++k)
    out << "static " << ty << " u" << k << "[" << model.width(k) << "];\n";

  out << "\nint main(";
  out << (opts.argv_inputs ? "int argc, char **argv" : "void");
  out << ")\n{\n"
      << "    int64_t mul;\n"
      << "    int64_t acc;\n\n";

  if (opts.argv_inputs) {
    out << "    if (argc != " << model.input_dim + 1 << ") {\n"
        << "        fprintf(stderr, \"usage: %s";
    for (std::size_t i = 0; i < model.input_dim; ++i) out << " m" << i;
    out << "\\n\"";
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      FxFormat wide = input_conversion_format(plan.x[0][i].msb, T);
      out << "\n            \"  m" << i << ": mantissa of input " << i << " at "
          << detail::fmt_comment(wide) << "\\n\"";
    }
    out << ", argv[0]);\n"
        << "        return 2;\n"
        << "    }\n";
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      FxFormat wide = input_conversion_format(plan.x[0][i].msb, T);
      out << "    x0[" << i << "] = (" << ty << ")strtoll(argv[" << i + 1
          << "], 0, 10); /* " << detail::fmt_comment(wide) << " */\n";
    }
  } else {
    for (std::size_t i = 0; i < model.input_dim; ++i) {
      FxFormat wide = input_conversion_format(plan.x[0][i].msb, T);
      std::int64_t mant = scale_trunc(inputs[i], wide.frac);
      detail::check_storage(mant, T, "input " + std::to_string(i));
      out << "    x0[" << i << "] = " << mant << "; /* "
          << detail::fmt_comment(wide) << " */\n";
    }
  }
  for (std::size_t i = 0; i < model.input_dim; ++i) {
    FxFormat wide = input_conversion_format(plan.x[0][i].msb, T);
    int shift = wide.frac - plan.x[0][i].frac;
    if (shift < 0) throw emit_error("emit: negative input alignment shift");
    if (shift > 0)
      out << "    x0[" << i << "] = (" << ty << ")(x0[" << i << "] >> " << shift
          << "); /* " << detail::fmt_comment(plan.x[0][i]) << " */\n";
  }
  out << "\n";

  for (int k = 0; k < m; ++k) {
    const auto& layer = model.layers[k];
    const std::string in_name = k == 0 ? "x0" : "u" + std::to_string(k);
    for (std::size_t i = 0; i < layer.width(); ++i) {
      const FxFormat& uf = plan.u[k][i];
      if (uf.msb + uf.frac + 1 > T - 1)
        throw emit_error("emit: accumulator format exceeds word size");
      out << "    /* u" << k + 1 << "[" << i << "] " << detail::fmt_comment(uf)
          << " */\n"
          << "    acc = 0;\n";
      for (std::size_t j = 0; j < model.width(k); ++j) {
        const FxFormat& wf = plan.w[k][i][j];
        const FxFormat& xf = plan.x[k][j];
        std::int64_t wm = scale_trunc(layer.weights[i][j], wf.frac);
        int shift = wf.frac + xf.frac - uf.frac;
        if (shift < 0) throw emit_error("emit: negative product shift");
        out << "    mul = (int64_t)" << wm << " * " << in_name << "[" << j
            << "]; /* w " << detail::fmt_comment(wf) << " * x "
            << detail::fmt_comment(xf) << " */\n";
        if (shift > 0) out << "    mul = mul >> " << shift << ";\n";
        out << "    acc = acc + mul;\n";
      }
      const float b = layer.bias[i];
      std::int64_t bm = scale_trunc(b, uf.frac);
      FxFormat bias_fmt{b != 0.0f ? ufp(std::fabs(double{b})) : 0, uf.frac};
      out << "    acc = acc + " << bm << "; /* bias "
          << detail::fmt_comment(bias_fmt) << " */\n";
      if (layer.activation == Activation::ReLU)
        out << "    acc = max64(0, acc);\n";
      out << "    u" << k + 1 << "[" << i << "] = (" << ty << ")acc;\n\n";
    }
    if (k + 1 < m) {
      for (std::size_t i = 0; i < layer.width(); ++i) {
        int shift = plan.u[k][i].frac - plan.x[k + 1][i].frac;
        if (shift < 0) throw emit_error("emit: negative layer alignment shift");
        if (shift > 0)
          out << "    u" << k + 1 << "[" << i << "] = (" << ty << ")(u" << k + 1
              << "[" << i << "] >> " << shift << "); /* "
              << detail::fmt_comment(plan.x[k + 1][i]) << " */\n";
      }
      out << "\n";
    }
  }

  for (std::size_t i = 0; i < model.layers.back().width(); ++i) {
    const FxFormat& uf = plan.u[m - 1][i];
    out << "    printf(\"u" << m << "[" << i << "] = %lld * 2^-" << uf.frac
        << " /* " << detail::fmt_comment(uf) << " */\\n\", (long long)u" << m
        << "[" << i << "]);\n";
  }
  out << "    return 0;\n}\n";
  return out.str();
}

// Single-precision reference program for side-by-side runs.
inline std::string emit_float_reference(const NetModel& model,
                                        const std::vector<double>& inputs) {
  if (inputs.size() != model.input_dim)
    throw emit_error("emit: input dimension mismatch");
  const int m = static_cast<int>(model.depth());
  std::ostringstream out;
  out.precision(9);  // round-trips any float
  out << std::showpoint;
  bool any_relu = false;
  for (const auto& layer : model.layers)
    if (layer.activation == Activation::ReLU) any_relu = true;
  out << "/* single-precision reference inference */\n"
      << "#include <stdio.h>\n\n";
  if (any_relu)
    out << "static float maxf(float a, float b) { return a > b ? a : b; }\n\n";
  out << "int main(void)\n{\n";
  out << "    float x0[" << model.input_dim << "];\n";
  for (int k = 1; k <= m; ++k)
    out << "    float u" << k << "[" << model.width(k) << "];\n";
  out << "    float acc;\n\n";
  for (std::size_t i = 0; i < model.input_dim; ++i)
    out << "    x0[" << i << "] = " << static_cast<float>(inputs[i]) << "f;\n";
  out << "\n";
  for (int k = 0; k < m; ++k) {
    const auto& layer = model.layers[k];
    const std::string in_name = k == 0 ? "x0" : "u" + std::to_string(k);
    for (std::size_t i = 0; i < layer.width(); ++i) {
      out << "    acc = 0.0f;\n";
      for (std::size_t j = 0; j < model.width(k); ++j)
        out << "    acc = acc + " << layer.weights[i][j] << "f * " << in_name
            << "[" << j << "];\n";
      out << "    acc = acc + " << layer.bias[i] << "f;\n";
      if (layer.activation == Activation::ReLU) out << "    acc = maxf(0.0f, acc);\n";
      out << "    u" << k + 1 << "[" << i << "] = acc;\n";
    }
    out << "\n";
  }
  for (std::size_t i = 0; i < model.layers.back().width(); ++i)
    out << "    printf(\"u" << m << "[" << i << "] = %.6f\\n\", (double)u" << m
        << "[" << i << "]);\n";
  out << "    return 0;\n}\n";
  return out.str();
}

}  // namespace fxsynth
