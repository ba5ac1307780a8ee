// Command-line entry point: gen-data, train, eval, experiments, gradcheck.

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gistnet/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string preset = "desk";
  std::vector<std::string> overrides;
};

// Dotted overrides arrive either as `--set key=value` or as bare
// `--key=value` tokens, which are pulled out before CLI11 sees them.
std::vector<std::string> extract_dotted(std::vector<std::string>& args) {
  std::vector<std::string> dotted;
  std::vector<std::string> rest;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (a.rfind("--", 0) == 0 && eq != std::string::npos && a.substr(2, eq - 2).find('.') != std::string::npos)
      dotted.push_back(a.substr(2));
    else
      rest.push_back(a);
  }
  args = std::move(rest);
  return dotted;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "JSON run configuration");
  cmd->add_option("--preset", args.preset, "Base preset: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
  cmd->add_option("--set", args.overrides, "Override a config field, e.g. --set train.seed=7");
}

gist::RunConfig resolve(const CommonArgs& args, const std::vector<std::string>& dotted) {
  std::vector<std::string> all = args.overrides;
  all.insert(all.end(), dotted.begin(), dotted.end());
  std::optional<std::filesystem::path> file;
  if (!args.config_path.empty()) file = args.config_path;
  return gist::resolve_run_config(args.preset, file, all);
}

}  // namespace

int main(int argc, char** argv) {
  gist::tune_allocator();
  std::vector<std::string> tokens(argv + 1, argv + argc);
  const std::vector<std::string> dotted = extract_dotted(tokens);

  CLI::App app{"Two-stream object recognition with scene context"};
  app.require_subcommand(1);
  CommonArgs common;
  bool force = false;
  std::string checkpoint, baseline, gistnet_ckpt, fovea_ckpt;
  std::size_t samples = 20;
  double tolerance = 1e-4;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset as PPM images and manifests");
  add_common(gen, common);

  auto* train = app.add_subcommand("train", "Train the configured model and write a checkpoint");
  add_common(train, common);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  add_common(eval, common);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--baseline", baseline, "Fovea-only checkpoint for per-category deltas");
  eval->add_flag("--force", force, "Load checkpoints whose config digest does not match");

  auto* exps = app.add_subcommand("experiments", "Ratio curve, blur sweep, embeddings and saliency");
  add_common(exps, common);
  exps->add_option("--gistnet", gistnet_ckpt, "GistNet checkpoint")->required();
  exps->add_option("--fovea", fovea_ckpt, "Fovea-only checkpoint")->required();
  exps->add_flag("--force", force, "Load checkpoints whose config digest does not match");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check in float64");
  add_common(grad, common);
  grad->add_option("--samples", samples, "Coordinates per tensor (0 = all)");
  grad->add_option("--tolerance", tolerance, "Maximum relative error");

  std::reverse(tokens.begin(), tokens.end());
  try {
    app.parse(tokens);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    const gist::RunConfig config = resolve(common, dotted);
    if (gen->parsed()) {
      const auto r = gist::cmd_gen_data(config);
      std::cout << "wrote " << r.train_count << " train and " << r.test_count << " test images to "
                << r.train_manifest.parent_path().string() << "\n";
    } else if (train->parsed()) {
      const auto r = gist::cmd_train(config, &std::cout);
      std::cout << "final loss " << r.result.final_loss << " after " << r.result.iterations << " iterations; wrote "
                << r.checkpoint.string() << "\n";
    } else if (eval->parsed()) {
      std::optional<std::filesystem::path> base;
      if (!baseline.empty()) base = baseline;
      const auto r = gist::cmd_eval(config, checkpoint, base, force);
      for (const auto& [k, acc] : r.report.topk) std::cout << "top-" << k << " " << acc << "\n";
      if (r.report.improved_category_count)
        std::cout << "improved categories " << *r.report.improved_category_count << " of "
                  << r.report.per_category.size() << "\n";
      std::cout << "wrote " << r.json.string() << "\n";
    } else if (exps->parsed()) {
      const auto r = gist::cmd_experiments(config, gistnet_ckpt, fovea_ckpt, force, &std::cout);
      std::cout << "gistnet top-1 " << r.gistnet_accuracy << ", fovea top-1 " << r.fovea_accuracy << "; wrote "
                << r.dir.string() << "\n";
    } else if (grad->parsed()) {
      gist::GradCheckOptions options;
      options.samples_per_tensor = samples;
      options.tolerance = tolerance;
      options.seed = config.train.seed.value_or(0);
      const auto r = gist::cmd_gradcheck(config, options);
      for (const auto& c : r.cases)
        std::cout << (c.report.passed ? "PASS " : "FAIL ") << c.name << " max_rel_err " << c.report.max_rel_err
                  << (c.report.passed ? "" : " worst " + c.report.worst_tensor()) << "\n";
      if (!r.passed) {
        std::cerr << "gradcheck failed; see " << r.report.string() << "\n";
        return gist::exit_code_for(gist::ErrorKind::kNumeric);
      }
    }
  } catch (const gist::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return gist::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
