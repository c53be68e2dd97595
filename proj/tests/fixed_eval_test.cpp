#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "fxsynth/fixed_eval.hpp"
#include "fxsynth/report.hpp"
#include "test_util.hpp"

using namespace fxsynth;

TEST_CASE("published mantissas for the worked example") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  FxTrace tr = eval_fixed(m, plan, {2.0, 0.5});

  CHECK(tr.post[0][0].mantissa() == 2624);
  CHECK(tr.post[0][0].format() == FxFormat{3, 9});
  CHECK(tr.post[0][1].mantissa() == 4535);
  CHECK(tr.post[0][1].format() == FxFormat{2, 10});
  CHECK(tr.post[1][0].mantissa() == 9643);
  CHECK(tr.post[1][1].mantissa() == 6854);
  CHECK(tr.post[2][0].mantissa() == 76620);
  CHECK(tr.post[2][0].format() == FxFormat{9, 10});
  CHECK(tr.post[2][1].mantissa() == -22536);
  CHECK(tr.post[2][1].format() == FxFormat{7, 10});
  CHECK_FALSE(tr.input_out_of_range);

  auto err = abs_error(m, plan, {2.0, 0.5});
  CHECK(err[0] <= 1.1e-2);
  CHECK(err[1] <= 1.7e-3);
}

TEST_CASE("input conversion goes through the widest format first") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  FxTrace tr = eval_fixed(m, plan, {2.0, 0.5});
  // 2.0 at <1,29> is 1073741824, shifted to <1,23>
  CHECK(tr.inputs[0].mantissa() == 16777216);
  CHECK(tr.inputs[0].format() == FxFormat{1, 23});
  CHECK(tr.inputs[1].mantissa() == 8388608);  // 0.5 at <-1,24>
}

TEST_CASE("zero input and zero bias give an all-zero trace") {
  NetModel m;
  m.input_dim = 1;
  m.input_range = {{-1.0, 1.0}};
  m.layers = {{{{0.5f}}, {0.0f}, Activation::ReLU},
              {{{2.0f}}, {0.0f}, Activation::Linear}};
  SynthesisConfig cfg;
  cfg.threshold = 0.01;
  cfg.bits = 32;
  SynthesisResult res = synthesize(m, cfg);
  REQUIRE(res.outcome.feasible);
  FxTrace tr = eval_fixed(m, res.plan, {0.0});
  for (const auto& layer : tr.post)
    for (const auto& v : layer) {
      CHECK(v.mantissa() == 0);
      CHECK(v.format() == FxFormat{0, 0});
    }
}

TEST_CASE("identity neuron truncates to its output precision") {
  NetModel m;
  m.input_dim = 1;
  m.input_range = {{0.0, 1.0}};
  m.layers = {{{{1.0f}}, {0.0f}, Activation::Linear}};

  FormatPlan plan;
  plan.bits = 32;
  plan.u = {{{0, 4}}};
  plan.x = {{{0, 8}}};
  plan.w = {{{{0, 1}}}};
  double x = 0.7;
  FxTrace tr = eval_fixed(m, plan, {x});
  // 0.7 truncated at 8 then 4 fractional bits
  CHECK(tr.post[0][0].mantissa() == 11);
  CHECK(fixed_to_float(tr.post[0][0]) == 0.6875);
}

TEST_CASE("out of range input sets the warning flag") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  FxTrace tr = eval_fixed(m, plan, {3.0, 0.5});
  CHECK(tr.input_out_of_range);
  FxTrace ok = eval_fixed(m, plan, {2.2, 0.6});
  CHECK_FALSE(ok.input_out_of_range);
}

TEST_CASE("per-neuron error respects the theta bound", "[prop]") {
  // formats chosen so every value magnitude is at most 2^M, the premise of
  // the bound's derivation
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> wv(-4.0, 4.0);
  std::uniform_int_distribution<int> lbits(2, 14), fan(1, 8);
  for (int iter = 0; iter < 400; ++iter) {
    const int n = fan(rng);
    std::vector<double> xs(n), ws(n);
    std::vector<FxFormat> xf, wf;
    std::vector<FxNum> xhat, what;
    for (int j = 0; j < n; ++j) {
      xs[j] = wv(rng);
      ws[j] = wv(rng);
      if (xs[j] == 0 || ws[j] == 0) { xs[j] = 1; ws[j] = 1; }
      xf.push_back({ufp(std::fabs(xs[j])) + 1, lbits(rng)});
      wf.push_back({ufp(std::fabs(ws[j])) + 1, lbits(rng)});
      xhat.push_back(float_to_fixed(xs[j], xf.back()));
      what.push_back(float_to_fixed(ws[j], wf.back()));
    }
    FxFormat uf{8, lbits(rng)};
    double bias = wv(rng);

    FxNum acc;
    for (int j = 0; j < n; ++j) {
      // same payload floor as the evaluator's product format
      FxFormat prod{std::max(wf[j].msb + xf[j].msb + 1, -uf.frac), uf.frac};
      acc = fx_add(acc, fx_mul(what[j], xhat[j], prod), uf);
    }
    FxFormat bias_fmt{bias != 0 ? ufp(std::fabs(bias)) : 0, uf.frac};
    acc = fx_add(acc, FxNum{scale_trunc(bias, bias_fmt.frac), bias_fmt}, uf);

    double exact = bias;
    for (int j = 0; j < n; ++j) exact += ws[j] * xs[j];
    double theta = std::fabs(exact - fixed_to_float(acc));
    REQUIRE(to_rational(theta) <= theta_bound(xf, wf, uf));
  }
}

TEST_CASE("solver assignments keep outputs within the threshold", "[prop]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> w(-2.0, 2.0);
  SynthesisConfig cfg;
  cfg.threshold = 0.05;
  cfg.bits = 32;
  int checked = 0;
  for (int iter = 0; iter < 12; ++iter) {
    NetModel m;
    m.input_dim = 2;
    m.input_range = {{-1.0, 1.0}, {0.0, 2.0}};
    std::uniform_int_distribution<int> depth(1, 2);
    int d = depth(rng);
    std::size_t prev = 2;
    for (int k = 0; k < d; ++k) {
      LayerSpec l;
      for (int i = 0; i < 2; ++i) {
        l.weights.emplace_back();
        for (std::size_t j = 0; j < prev; ++j) l.weights.back().push_back(float(w(rng)));
        l.bias.push_back(float(w(rng)));
      }
      l.activation = k + 1 == d ? Activation::Linear : Activation::ReLU;
      m.layers.push_back(std::move(l));
      prev = 2;
    }
    SynthesisResult res = synthesize(m, cfg);
    if (!res.outcome.feasible) continue;
    ++checked;
    std::uniform_real_distribution<double> x0(-1.0, 1.0), x1(0.0, 2.0);
    for (int t = 0; t < 50; ++t) {
      auto err = abs_error(m, res.plan, {x0(rng), x1(rng)});
      for (double e : err) REQUIRE(e <= cfg.threshold);
    }
  }
  CHECK(checked >= 8);
}

TEST_CASE("trace serializes with formats and decoded values") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  auto j = trace_to_json(eval_fixed(m, plan, {2.0, 0.5}));
  CHECK(j["outputs"].size() == 2);
  CHECK(j["outputs"][0]["mantissa"] == 76620);
  CHECK(j["outputs"][0]["M"] == 9);
  CHECK(j["outputs"][0]["L"] == 10);
  CHECK(j["layers"].size() == 3);
  CHECK(j["input_out_of_range"] == false);
}
