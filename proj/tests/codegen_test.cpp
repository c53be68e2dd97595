#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "fxsynth/codegen.hpp"
#include "fxsynth/report.hpp"
#include "test_util.hpp"

using namespace fxsynth;

namespace {

bool have_cc() { return std::system("cc --version > /dev/null 2>&1") == 0; }

std::string run_and_capture(const std::string& cmd) {
  std::array<char, 256> buf;
  std::string out;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  while (fgets(buf.data(), buf.size(), p)) out += buf.data();
  REQUIRE(pclose(p) == 0);
  return out;
}

// "u3[0] = 76620 * 2^-10 ..." -> mantissas in order
std::vector<long long> parse_mantissas(const std::string& text) {
  std::vector<long long> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto eq = line.find("= ");
    if (eq == std::string::npos) continue;
    out.push_back(std::stoll(line.substr(eq + 2)));
  }
  return out;
}

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/fxsynth_test_XXXXXX";
    path = mkdtemp(tmpl);
  }
  ~TempDir() { std::system(("rm -rf " + path).c_str()); }
};

}  // namespace

TEST_CASE("emitted statements follow the reference style") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  std::string src = emit(m, plan, {2.0, 0.5});

  CHECK(src.find("x0[0] = 1073741824; /* <1,29> */") != std::string::npos);
  CHECK(src.find("x0[0] = (int32_t)(x0[0] >> 6); /* <1,23> */") != std::string::npos);
  CHECK(src.find("max64(0, acc)") != std::string::npos);
  CHECK(src.find("require_arithmetic_shift") != std::string::npos);
  CHECK(src.find("int32_t") != std::string::npos);

  // integer-only: no floating-point type or literal in the fixed emission
  CHECK(src.find("float") == std::string::npos);
  CHECK(src.find("double") == std::string::npos);
}

TEST_CASE("emission is deterministic") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  CHECK(emit(m, plan, {2.0, 0.5}) == emit(m, plan, {2.0, 0.5}));
}

TEST_CASE("storage width is enforced") {
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  plan.bits = 8;  // published formats cannot fit 8-bit storage
  CHECK_THROWS_AS(emit(m, plan, {2.0, 0.5}), emit_error);
}

TEST_CASE("baked binary reproduces the published mantissas") {
  if (!have_cc()) {
    WARN("no host C compiler; skipping compiled check");
    return;
  }
  NetModel m = testutil::fig1();
  FormatPlan plan = testutil::fig1_published_plan();
  TempDir dir;
  std::ofstream(dir.path + "/net.c") << emit(m, plan, {2.0, 0.5});
  REQUIRE(std::system(("cc -std=c99 -Wall -Wextra -Werror -pedantic -o " + dir.path +
                       "/net " + dir.path + "/net.c")
                          .c_str()) == 0);
  auto got = parse_mantissas(run_and_capture(dir.path + "/net"));
  REQUIRE(got == std::vector<long long>{76620, -22536});
}

TEST_CASE("compiled code matches the evaluator bit for bit", "[golden]") {
  NetModel m = testutil::fig1();
  SynthesisConfig cfg;
  cfg.threshold = 0.02;
  cfg.bits = 32;
  SynthesisResult res = synthesize(m, cfg);
  REQUIRE(res.outcome.feasible);

  if (!have_cc()) {
    // fallback: compare the evaluator against the committed trace fixture
    std::ifstream in(std::string(FIXTURE_DIR) + "/golden_trace.json");
    REQUIRE(in.good());
    auto j = nlohmann::json::parse(in);
    for (const auto& c : j["cases"]) {
      auto x = c["input"].get<std::vector<double>>();
      FxTrace tr = eval_fixed(m, res.plan, x);
      auto want = c["mantissas"].get<std::vector<long long>>();
      REQUIRE(tr.outputs().size() == want.size());
      for (std::size_t i = 0; i < want.size(); ++i)
        CHECK(tr.outputs()[i].mantissa() == want[i]);
    }
    return;
  }

  TempDir dir;
  EmitOptions opts;
  opts.argv_inputs = true;
  std::ofstream(dir.path + "/net.c") << emit(m, res.plan, {2.0, 0.5}, opts);
  REQUIRE(std::system(("cc -std=c99 -Wall -Wextra -Werror -pedantic -o " + dir.path +
                       "/net " + dir.path + "/net.c")
                          .c_str()) == 0);

  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> x0(1.5, 2.5), x1(0.25, 0.75);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<double> x{x0(rng), x1(rng)};
    FxTrace tr = eval_fixed(m, res.plan, x);

    // feed the conversion-format mantissas, exactly what the evaluator uses
    std::ostringstream cmd;
    cmd << dir.path << "/net";
    for (std::size_t i = 0; i < x.size(); ++i) {
      FxFormat wide = input_conversion_format(res.plan.x[0][i].msb, res.plan.bits);
      cmd << " " << scale_trunc(x[i], wide.frac);
    }
    auto got = parse_mantissas(run_and_capture(cmd.str()));
    REQUIRE(got.size() == tr.outputs().size());
    for (std::size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == tr.outputs()[i].mantissa());
  }
}

TEST_CASE("float reference program matches the float evaluator") {
  if (!have_cc()) {
    WARN("no host C compiler; skipping compiled check");
    return;
  }
  NetModel m = testutil::fig1();
  TempDir dir;
  std::ofstream(dir.path + "/ref.c") << emit_float_reference(m, {2.0, 0.5});
  REQUIRE(std::system(("cc -std=c99 -Wall -Wextra -Werror -pedantic -o " + dir.path +
                       "/ref " + dir.path + "/ref.c")
                          .c_str()) == 0);
  std::string out = run_and_capture(dir.path + "/ref");
  CHECK(out.find("74.813") != std::string::npos);
  CHECK(out.find("-22.009") != std::string::npos);
}

TEST_CASE("smaller word sizes emit matching storage types") {
  NetModel m;
  m.input_dim = 1;
  m.input_range = {{0.0, 1.0}};
  m.layers = {{{{0.5f}}, {0.25f}, Activation::Linear}};
  SynthesisConfig cfg;
  cfg.threshold = 0.25;
  cfg.bits = 8;
  SynthesisResult res = synthesize(m, cfg);
  REQUIRE(res.outcome.feasible);
  std::string src = emit(m, res.plan, {0.5});
  CHECK(src.find("int8_t") != std::string::npos);

  if (have_cc()) {
    TempDir dir;
    std::ofstream(dir.path + "/net8.c") << src;
    REQUIRE(std::system(("cc -std=c99 -Wall -Wextra -Werror -pedantic -o " + dir.path +
                         "/net8 " + dir.path + "/net8.c")
                            .c_str()) == 0);
    auto got = parse_mantissas(run_and_capture(dir.path + "/net8"));
    FxTrace tr = eval_fixed(m, res.plan, {0.5});
    REQUIRE(got.size() == 1);
    CHECK(got[0] == tr.outputs()[0].mantissa());
  }
}
