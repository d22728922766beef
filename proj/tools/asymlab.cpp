// asymlab command-line driver. Exit codes: 0 all expected verdicts met,
// 1 verdict mismatch, 2 usage, config or I/O error.

#include "asymlab/error.hpp"
#include "asymlab/generators.hpp"
#include "asymlab/harness/experiments.hpp"
#include "asymlab/harness/output.hpp"

#include <CLI11.hpp>

#include <functional>
#include <iostream>
#include <optional>
#include <string>

using namespace asymlab;
using nlohmann::json;

namespace {

constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

json load_config(const std::string& path) {
  return path.empty() ? json::object() : read_json_file(path);
}

int finish(const OutputDir& out, const ExperimentResult& r) {
  write_result(out, r);
  std::size_t passed = 0;
  for (const auto& c : r.checks) passed += c.pass();
  std::cout << r.experiment << ": " << passed << " of " << r.checks.size() << " checks pass, "
            << "expectations " << (r.expectations_met ? "met" : "NOT met") << " ("
            << out.root().string() << "/results.json)\n";
  return r.expectations_met ? 0 : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"asymlab: interaction-asymmetry certification and toy slot autoencoders"};
  app.require_subcommand(1);
  std::string out_dir, config_path;
  bool force = false;

  auto add_common = [&](CLI::App* sub, bool with_config) {
    sub->add_option("--out", out_dir, "Output directory")->required();
    sub->add_flag("--force", force, "Allow writing into an existing non-empty directory");
    if (with_config) sub->add_option("--config", config_path, "JSON config (defaults when omitted)");
  };

  std::string generator_path;
  GeneratorCheckConfig check_cfg;
  auto* check = app.add_subcommand("check", "Certify one generator at a declared interaction order");
  check->add_option("--generator", generator_path, "Generator JSON")->required();
  check->add_option("--order", check_cfg.order, "Interaction order bound n")->required()->check(CLI::Range(0, 2));
  check->add_option("--probes", check_cfg.probes, "Probe count")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_cfg.seed, "Probe seed");
  check->add_option("--equiv", check_cfg.equiv_samples, "Random equivalent generators");
  check->add_option("--radius", check_cfg.probe_radius, "Probe box half-width");
  add_common(check, false);

  PresetOptions preset_opts;
  auto* preset = app.add_subcommand("preset", "Write a random generator of bounded interaction order");
  preset->add_option("--order", preset_opts.order_bound, "Interaction order bound n")->check(CLI::Range(0, 2));
  preset->add_option("--blocks", preset_opts.block_sizes, "Slot sizes")->delimiter(',');
  preset->add_option("--out-dim", preset_opts.out_dim, "Output dimension (0 = recommended)");
  preset->add_option("--seed", preset_opts.seed, "Seed");
  add_common(preset, false);

  auto* characterize = app.add_subcommand("characterize", "Round-trip the preset generator suite");
  add_common(characterize, true);
  auto* compgen = app.add_subcommand("compgen", "Band-support extrapolation study");
  add_common(compgen, true);
  auto* trainc = app.add_subcommand("train", "Train one toy slot autoencoder");
  add_common(trainc, true);
  int seeds = 0;
  auto* ablate = app.add_subcommand("ablate", "(alpha, beta) ablation grid");
  ablate->add_option("--seeds", seeds, "Seeds per cell (overrides the config)")->check(CLI::PositiveNumber);
  add_common(ablate, true);
  JacobianCheckConfig jac_cfg;
  auto* jac = app.add_subcommand("jac-check", "Attention Jacobian and L_interact verification");
  jac->add_option("--trials", jac_cfg.trials, "Random instances")->check(CLI::PositiveNumber);
  jac->add_option("--seed", jac_cfg.seed, "Seed");
  add_common(jac, false);
  auto* gen = app.add_subcommand("gen-data", "Render a toy sprite dataset");
  add_common(gen, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    // Load configs before touching the output directory.
    std::function<ExperimentResult(const OutputDir&)> run;
    if (check->parsed()) {
      const GeneratorSpec spec = generator_from_json(read_json_file(generator_path));
      run = [=](const OutputDir&) { return exp_check_generator(spec, check_cfg); };
    } else if (preset->parsed()) {
      const GeneratorSpec spec = make_preset(preset_opts);
      run = [=](const OutputDir& out) {
        out.write_json("generator.json", generator_to_json(spec));
        ExperimentResult r;
        r.experiment = "preset";
        r.config = {{"order", preset_opts.order_bound},
                    {"blocks", preset_opts.block_sizes},
                    {"out_dim", spec.out_dim()},
                    {"seed", preset_opts.seed}};
        r.seed = preset_opts.seed;
        r.details = {{"structural_interaction_order", structural_interaction_order(spec)}};
        return r;
      };
    } else if (characterize->parsed()) {
      const auto cfg = characterization_config_from_json(load_config(config_path));
      run = [=](const OutputDir&) { return exp_characterization(cfg); };
    } else if (compgen->parsed()) {
      const auto cfg = compgen_config_from_json(load_config(config_path));
      run = [=](const OutputDir&) { return exp_compgen(cfg); };
    } else if (trainc->parsed()) {
      json j = load_config(config_path);
      if (config_path.empty()) j = to_json(default_ablation_config().run);
      const auto cfg = train_run_config_from_json(j);
      run = [=](const OutputDir& out) { return exp_train(cfg, &out); };
    } else if (ablate->parsed()) {
      auto cfg = ablation_config_from_json(load_config(config_path));
      if (seeds > 0) cfg.seeds = seeds;
      run = [=](const OutputDir& out) { return exp_train_ablation(cfg, &out); };
    } else if (jac->parsed()) {
      run = [=](const OutputDir&) { return exp_jacobian_check(jac_cfg); };
    } else if (gen->parsed()) {
      const auto cfg = dataset_config_from_json(load_config(config_path));
      run = [=](const OutputDir& out) { return exp_gen_data(cfg, &out); };
    }
    const OutputDir out(out_dir, force);
    return finish(out, run(out));
  } catch (const Error& e) {
    std::cerr << "asymlab: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "asymlab: " << e.what() << "\n";
    return kExitUsage;
  }
}
