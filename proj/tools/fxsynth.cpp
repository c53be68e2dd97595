// Command line front end: synthesize fixed-point formats for a network and
// emit reports, C code and feasibility sweeps.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fxsynth/report.hpp"

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::vector<std::vector<double>> parse_probes(const std::string& text,
                                              std::size_t dim) {
  auto j = nlohmann::json::parse(text);
  std::vector<std::vector<double>> probes;
  if (!j.is_array()) throw std::runtime_error("probe: expected a JSON array");
  if (!j.empty() && j.front().is_number()) {
    probes.push_back(j.get<std::vector<double>>());
  } else {
    for (const auto& row : j) probes.push_back(row.get<std::vector<double>>());
  }
  for (const auto& p : probes)
    if (p.size() != dim) throw std::runtime_error("probe: dimension mismatch");
  return probes;
}

std::uint64_t seed_from_env() {
  const char* s = std::getenv("FXSYNTH_SEED");
  return s ? std::strtoull(s, nullptr, 10) : 0;
}

int run_synth(const std::string& model_path, double threshold, int bits,
              const std::string& mode, std::size_t samples,
              const std::string& emit_path, const std::string& report_path,
              const std::string& probe_json) {
  fxsynth::NetModel model = fxsynth::load_model(model_path);

  fxsynth::SynthesisConfig cfg;
  cfg.threshold = threshold;
  cfg.bits = bits;
  cfg.mode = mode == "sampled" ? fxsynth::AnalysisMode::Sampled
                               : fxsynth::AnalysisMode::Interval;
  cfg.samples = samples;
  cfg.seed = seed_from_env();

  fxsynth::SynthesisResult res = fxsynth::synthesize(model, cfg);
  if (!res.outcome.feasible) {
    std::cerr << "Infeasible: violated constraint family " << res.outcome.witness
              << "\n";
    if (!report_path.empty()) {
      fxsynth::SynthesisReport rep = fxsynth::make_report(model, cfg, res, {});
      write_file(report_path, report_path.ends_with(".json")
                                  ? fxsynth::report_to_json(rep).dump(2) + "\n"
                                  : fxsynth::report_to_markdown(rep));
    }
    return 2;
  }

  std::vector<std::vector<double>> extra;
  if (!probe_json.empty()) extra = parse_probes(probe_json, model.input_dim);
  fxsynth::SynthesisReport rep = fxsynth::make_report(model, cfg, res, extra);

  if (!emit_path.empty()) {
    // bake the center of the input box
    std::vector<double> center(model.input_dim);
    for (std::size_t i = 0; i < center.size(); ++i)
      center[i] = (model.input_range[i].first + model.input_range[i].second) / 2;
    write_file(emit_path, fxsynth::emit(model, res.plan, center));
  }
  if (!report_path.empty())
    write_file(report_path, report_path.ends_with(".json")
                                ? fxsynth::report_to_json(rep).dump(2) + "\n"
                                : fxsynth::report_to_markdown(rep));

  std::cout << "Feasible, objective " << rep.objective << ", gain "
            << rep.gain.gain_percent << "%" << (res.guard_delta >= 0
                                                    ? ", guard margin " +
                                                          std::to_string(res.guard_delta)
                                                    : "")
            << "\n";
  double worst = 0;
  for (const auto& pr : rep.probes) worst = std::max(worst, pr.max_output_error);
  std::cout << "max probe error " << worst << " (threshold " << threshold << ")\n";
  return rep.all_errors_within_threshold ? 0 : 2;
}

int run_sweep(const std::string& model_path, const std::vector<double>& thresholds,
              const std::vector<int>& bits_list, const std::string& out_path) {
  fxsynth::NetModel model = fxsynth::load_model(model_path);
  fxsynth::SweepResult sw = fxsynth::feasibility_sweep(model, thresholds, bits_list);
  std::string csv = fxsynth::sweep_to_csv(sw);
  if (out_path.empty()) std::cout << csv;
  else write_file(out_path, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fixed-point format synthesis for feed-forward networks"};
  app.require_subcommand(1);

  std::string model_path, mode = "interval", emit_path, report_path, probe_json;
  double threshold = 0;
  int bits = 32;
  std::size_t samples = 1000;

  auto* synth = app.add_subcommand("synth", "synthesize formats for one setting");
  synth->add_option("--model", model_path, "network JSON file")->required();
  synth->add_option("--threshold", threshold, "output error threshold in (0,1)")
      ->required();
  synth->add_option("--bits", bits, "word size")
      ->required()
      ->check(CLI::IsMember({8, 16, 32}));
  synth->add_option("--mode", mode, "range analysis mode")
      ->check(CLI::IsMember({"interval", "sampled"}));
  synth->add_option("--samples", samples, "sample count for sampled mode");
  synth->add_option("--emit-c", emit_path, "write fixed-point C code here");
  synth->add_option("--report", report_path, "write report here (.json or .md)");
  synth->add_option("--probe", probe_json, "extra probe inputs as JSON");

  std::vector<double> thresholds;
  std::vector<int> bits_list;
  std::string out_path;
  auto* sweep = app.add_subcommand("sweep", "feasibility matrix over settings");
  sweep->add_option("--model", model_path, "network JSON file")->required();
  sweep->add_option("--thresholds", thresholds, "threshold values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--bits-list", bits_list, "word sizes")
      ->required()
      ->delimiter(',')
      ->check(CLI::IsMember({8, 16, 32}));
  sweep->add_option("--out", out_path, "CSV output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed())
      return run_synth(model_path, threshold, bits, mode, samples, emit_path,
                       report_path, probe_json);
    return run_sweep(model_path, thresholds, bits_list, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
