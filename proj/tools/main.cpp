#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace wsdaor;
using namespace wsdaor::cli;

int main(int argc, char** argv) {
  CLI::App app{"Weakly supervised domain adaptation for ordinal intensity estimation"};
  app.require_subcommand(1);

  CommonOptions common;
  std::uint64_t seed = 0;
  std::string out, level;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "INI experiment config");
    sub->add_option("--seed", seed, "overrides [experiment] seed");
    sub->add_option("--out", out, "output directory");
    sub->add_flag("--quiet", common.quiet, "no progress output");
  };

  auto* generate = app.add_subcommand("generate", "write a synthetic two-domain dataset");
  auto* train = app.add_subcommand("train", "train one model and write its checkpoint and history");
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the target sequences");
  auto* ablate = app.add_subcommand("ablate", "run an ablation table under LOSO");
  auto* encode = app.add_subcommand("encode", "print the Gaussian code of an ordinal label");
  for (auto* sub : {generate, train, evaluate, ablate}) add_common(sub);

  std::string checkpoint;
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  evaluate->add_option("--level", level, "frame or sequence")->check(CLI::IsMember({"frame", "sequence"}));

  int label = 0, levels = kDefaultLevels;
  double sigma = 0.3;
  bool normalize = false;
  encode->add_option("label", label, "ordinal level")->required();
  encode->add_option("--sigma", sigma, "Gaussian width");
  encode->add_option("--levels", levels, "number of levels K");
  encode->add_flag("--normalize", normalize, "divide the code by its sum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  for (auto* sub : {generate, train, evaluate, ablate}) {
    if (sub->count("--seed")) common.seed = seed;
    if (sub->count("--out")) common.out = out;
  }
  if (!level.empty()) common.level = parse_metric_level(level);

  if (*generate) return cmd_generate(common, std::cout, std::cerr);
  if (*train) return cmd_train(common, std::cout, std::cerr);
  if (*evaluate) return cmd_evaluate(common, checkpoint, std::cout, std::cerr);
  if (*ablate) return cmd_ablate(common, std::cout, std::cerr);
  return cmd_encode(label, sigma, levels, normalize, std::cout, std::cerr);
}
