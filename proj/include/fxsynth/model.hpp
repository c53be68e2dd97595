#pragma once

// Network model loading and the single-precision reference evaluator.
//
// On-disk format is a plain JSON document:
//   { "input_dim": n,
//     "input_range": [[lo, hi], ...],
//     "layers": [ { "activation": "relu"|"linear",
//                   "weights": [[...], ...], "bias": [...] }, ... ] }
// Coefficients are parsed to the nearest single-precision value.

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fxsynth {

enum class Activation { ReLU, Linear };

inline const char* to_string(Activation a) {
  return a == Activation::ReLU ? "relu" : "linear";
}

struct LayerSpec {
  std::vector<std::vector<float>> weights;  // width_k x width_{k-1}
  std::vector<float> bias;                  // width_k
  Activation activation = Activation::ReLU;

  std::size_t width() const { return weights.size(); }
  std::size_t fan_in() const { return weights.empty() ? 0 : weights.front().size(); }
};

struct NetModel {
  std::size_t input_dim = 0;
  std::vector<std::pair<double, double>> input_range;  // per input, closed
  std::vector<LayerSpec> layers;

  std::size_t depth() const { return layers.size(); }
  std::size_t width(std::size_t k) const {
    return k == 0 ? input_dim : layers[k - 1].width();
  }
  std::size_t max_width() const {
    std::size_t w = input_dim;
    for (const auto& l : layers) w = std::max(w, l.width());
    return w;
  }
};

class model_error : public std::runtime_error {
 public:
  explicit model_error(const std::string& what) : std::runtime_error(what) {}
};

inline void validate(const NetModel& m) {
  if (m.input_dim == 0) throw model_error("model: input_dim must be positive");
  if (m.layers.empty()) throw model_error("model: at least one layer required");
  if (m.input_range.size() != m.input_dim)
    throw model_error("model: input_range must have one interval per input");
  for (const auto& [lo, hi] : m.input_range)
    if (!(lo <= hi)) throw model_error("model: input_range interval with lo > hi");
  std::size_t prev = m.input_dim;
  for (std::size_t k = 0; k < m.layers.size(); ++k) {
    const auto& l = m.layers[k];
    if (l.weights.empty()) throw model_error("model: layer " + std::to_string(k) + " is empty");
    if (l.bias.size() != l.weights.size())
      throw model_error("model: layer " + std::to_string(k) + " bias length mismatch");
    for (const auto& row : l.weights) {
      if (row.size() != prev)
        throw model_error("model: layer " + std::to_string(k) + " weight shape mismatch");
      for (float w : row)
        if (!std::isfinite(w))
          throw model_error("model: non-finite weight in layer " + std::to_string(k));
    }
    for (float b : l.bias)
      if (!std::isfinite(b))
        throw model_error("model: non-finite bias in layer " + std::to_string(k));
    prev = l.weights.size();
  }
}

inline NetModel model_from_json(const nlohmann::json& j) {
  NetModel m;
  try {
    m.input_dim = j.at("input_dim").get<std::size_t>();
    for (const auto& r : j.at("input_range"))
      m.input_range.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
    for (const auto& lj : j.at("layers")) {
      LayerSpec l;
      const std::string act = lj.at("activation").get<std::string>();
      if (act == "relu") l.activation = Activation::ReLU;
      else if (act == "linear") l.activation = Activation::Linear;
      else throw model_error("model: unknown activation '" + act + "'");
      for (const auto& row : lj.at("weights"))
        l.weights.push_back(row.get<std::vector<float>>());
      l.bias = lj.at("bias").get<std::vector<float>>();
      m.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw model_error(std::string("model: malformed JSON document: ") + e.what());
  }
  validate(m);
  return m;
}

inline nlohmann::json model_to_json(const NetModel& m) {
  nlohmann::json j;
  j["input_dim"] = m.input_dim;
  auto& range = j["input_range"] = nlohmann::json::array();
  for (const auto& [lo, hi] : m.input_range) range.push_back({lo, hi});
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : m.layers) {
    nlohmann::json lj;
    lj["activation"] = to_string(l.activation);
    lj["weights"] = l.weights;
    lj["bias"] = l.bias;
    layers.push_back(std::move(lj));
  }
  return j;
}

inline NetModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw model_error("model: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw model_error("model: parse error in '" + path + "': " + e.what());
  }
  return model_from_json(j);
}

inline void save_model(const NetModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw model_error("model: cannot write '" + path + "'");
  out << model_to_json(m).dump(2) << '\n';
}

// IEEE754 single-precision evaluation, left-to-right accumulation.  Returns
// all neuron values layer by layer; back() is the output layer.
inline std::vector<std::vector<float>> eval_float_trace(const NetModel& m,
                                                        const std::vector<double>& x) {
  if (x.size() != m.input_dim) throw model_error("eval_float: input dimension mismatch");
  std::vector<std::vector<float>> trace;
  std::vector<float> cur(x.begin(), x.end());
  for (const auto& l : m.layers) {
    std::vector<float> next(l.width());
    for (std::size_t i = 0; i < l.width(); ++i) {
      float acc = 0.0f;
      for (std::size_t j = 0; j < cur.size(); ++j)
        acc = acc + l.weights[i][j] * cur[j];
      acc = acc + l.bias[i];
      if (l.activation == Activation::ReLU) acc = std::max(0.0f, acc);
      next[i] = acc;
    }
    trace.push_back(next);
    cur = std::move(next);
  }
  return trace;
}

inline std::vector<float> eval_float(const NetModel& m, const std::vector<double>& x) {
  return eval_float_trace(m, x).back();
}

}  // namespace fxsynth
