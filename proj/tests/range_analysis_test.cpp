#include <catch2/catch_amalgamated.hpp>

#include "fxsynth/range_analysis.hpp"
#include "test_util.hpp"

using namespace fxsynth;

TEST_CASE("interval analysis brackets the worked example") {
  NetModel m = testutil::fig1();
  RangeReport rep = analyze_interval(m);
  REQUIRE(rep.layers.size() == 3);

  // u10 = 3.5*x0 + 0.25*x1 - 2 over [1.5,2.5]x[0.25,0.75]
  CHECK(rep.layers[0][0].pre.lo == to_rational(3.5 * 1.5 + 0.25 * 0.25 - 2));
  CHECK(rep.layers[0][0].pre.hi == to_rational(3.5 * 2.5 + 0.25 * 0.75 - 2));

  // every layer's interval contains the evaluation at the probe point
  auto trace = eval_float_trace(m, {2.0, 0.5});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(rep.layers[k][i].post.contains(to_rational(trace[k][i])));
}

TEST_CASE("relu clamps interval lower bounds") {
  NetModel m;
  m.input_dim = 1;
  m.input_range = {{-2.0, 1.0}};
  m.layers = {{{{1.0f}}, {0.0f}, Activation::ReLU}};
  RangeReport rep = analyze_interval(m);
  CHECK(rep.layers[0][0].pre.lo == Rational{-2});
  CHECK(rep.layers[0][0].post.lo == Rational{0});
  CHECK(rep.layers[0][0].post.hi == Rational{1});
}

TEST_CASE("prefix magnitude exceeds the final interval when terms cancel") {
  // 8*x - 8*x: final pre-activation is 0 but the running sum reaches 8
  NetModel m;
  m.input_dim = 2;
  m.input_range = {{1.0, 1.0}, {1.0, 1.0}};
  m.layers = {{{{8.0f, -8.0f}}, {0.0f}, Activation::Linear}};
  RangeReport rep = analyze_interval(m);
  CHECK(rep.layers[0][0].pre.lo == Rational{0});
  CHECK(rep.layers[0][0].pre.hi == Rational{0});
  CHECK(rep.layers[0][0].acc_mag == Rational{8});

  MMap mm = assign_M(rep, m);
  CHECK(mm.u[0][0] == 3);  // sized for the prefix, not the cancelled result
}

TEST_CASE("M assignment for the worked example") {
  NetModel m = testutil::fig1();
  RangeReport rep = analyze_interval(m);
  MMap mm = assign_M(rep, m);

  CHECK(mm.x[0] == std::vector<int>{1, -1});  // ufp(2.5), ufp(0.75)
  CHECK(mm.w[0][0] == std::vector<int>{1, -2});
  CHECK(mm.w[0][1] == std::vector<int>{0, 2});
  CHECK(mm.w[2][0] == std::vector<int>{2, 3});
  CHECK(mm.w[2][1] == std::vector<int>{-3, 1});

  // hidden-layer inputs reuse the producing neuron's M
  CHECK(mm.x[1] == mm.u[0]);
  CHECK(mm.x[2] == mm.u[1]);

  // interval bounds dominate every float evaluation seen at the probe
  auto trace = eval_float_trace(m, {2.0, 0.5});
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      if (trace[k][i] != 0.0f)
        CHECK(mm.u[k][i] >= ufp(std::fabs(double{trace[k][i]})));
}

TEST_CASE("structural M policy stacks product and carry bits") {
  NetModel m;
  m.input_dim = 1;
  m.input_range = {{0.0, 2.0}};  // Mx = 1
  m.layers = {{{{3.0f}}, {1.0f}, Activation::Linear}};  // Mw = 1, Mb = 0
  RangeReport rep = analyze_interval(m);
  MMap tight = assign_M(rep, m, MPolicy::TightInterval);
  MMap structural = assign_M(rep, m, MPolicy::Structural);
  CHECK(tight.u[0][0] == 2);       // ufp(7)
  CHECK(structural.u[0][0] == 3);  // (Mw + Mx) + 1 carry
  CHECK(structural.u[0][0] >= tight.u[0][0]);
}

TEST_CASE("sampled analysis is seeded and adds a guard bit") {
  NetModel m = testutil::fig1();
  RangeReport a = analyze_sampled(m, 200, 42);
  RangeReport b = analyze_sampled(m, 200, 42);
  RangeReport c = analyze_sampled(m, 200, 43);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(a.layers[k][i].post.lo == b.layers[k][i].post.lo);
      CHECK(a.layers[k][i].post.hi == b.layers[k][i].post.hi);
    }
  // different seed still lands inside the interval bounds, modulo the float
  // rounding of the sampled evaluator
  RangeReport iv = analyze_interval(m);
  const Rational tol = to_rational(1e-3);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(c.layers[k][i].post.lo >= iv.layers[k][i].post.lo - tol);
      CHECK(c.layers[k][i].post.hi <= iv.layers[k][i].post.hi + tol);
    }

  MMap sampled = assign_M(a, m);
  MMap interval = assign_M(iv, m);
  for (std::size_t k = 0; k < 3; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      CHECK(sampled.u[k][i] >= interval.u[k][i] - 1);  // +1 guard keeps it close
}

TEST_CASE("range report serializes") {
  NetModel m = testutil::fig1();
  auto j = report_to_json(analyze_interval(m));
  CHECK(j["mode"] == "interval");
  CHECK(j["inputs"].size() == 2);
  CHECK(j["layers"].size() == 3);
}
