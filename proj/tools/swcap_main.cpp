#include <iostream>

#include "CLI11.hpp"
#include "swcap/commands.hpp"

namespace {

// One value per occurrence, so repeated flags never swallow positionals.
CLI::Option* repeatable(CLI::Option* opt) {
  return opt->allow_extra_args(false)->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
}

void add_config_flags(CLI::App* cmd, swcap::ConfigOptions& c) {
  cmd->add_option("-c,--config", c.file, "JSON config file");
  cmd->add_option("--profile", c.profile, "Built-in profile: desk or paper");
  repeatable(cmd->add_option("--set", c.overrides, "Override KEY=VALUE, dotted keys (repeatable)"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"swcap: windowed-attention image captioner"};
  app.require_subcommand(1);

  swcap::GenSyntheticOptions gen;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Render a synthetic shapes dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.count, "Number of scenes");
  gen_cmd->add_option("--seed", gen.seed, "Generator seed");
  gen_cmd->add_option("--style", gen.style, "Caption template: standard or alternate");
  gen_cmd->add_option("--layouts", gen.layouts, "Placements: all, primary or held-out");
  gen_cmd->add_option("--compositions", gen.compositions, "Color/shape pairings: all, primary or held-out");
  gen_cmd->add_option("--pair-fraction", gen.pair_fraction, "Probability of a two-object scene");

  swcap::ConfigOptions xe;
  auto* xe_cmd = app.add_subcommand("train-xe", "Cross-entropy training");
  add_config_flags(xe_cmd, xe);

  swcap::ConfigOptions scst;
  std::string init;
  auto* scst_cmd = app.add_subcommand("train-scst", "Self-critical fine-tuning from a checkpoint");
  add_config_flags(scst_cmd, scst);
  scst_cmd->add_option("--init", init, "Starting checkpoint")->required();

  swcap::CaptionOptions cap;
  auto* cap_cmd = app.add_subcommand("caption", "Caption images; several checkpoints form an ensemble");
  add_config_flags(cap_cmd, cap.config);
  repeatable(cap_cmd->add_option("--checkpoint", cap.checkpoints, "Checkpoint (repeatable)"))->required();
  cap_cmd->add_option("--data", cap.data, "Dataset directory to caption");
  cap_cmd->add_option("--out", cap.out, "JSON-lines output file");
  cap_cmd->add_option("--attn-dir", cap.attn_dir, "Write one attention document per image here");
  cap_cmd->add_option("inputs", cap.inputs, "Image (.rti, .ppm) or feature (.feat) files");

  swcap::EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "BLEU-1..4, ROUGE-L and CIDEr-D on a dataset");
  add_config_flags(eval_cmd, ev.config);
  repeatable(eval_cmd->add_option("--checkpoint", ev.checkpoints, "Checkpoint (repeatable)"))->required();
  eval_cmd->add_option("--data", ev.data, "Dataset directory (default data.eval)");
  eval_cmd->add_option("--out", ev.out, "JSON copy of the table");

  swcap::DumpAttnOptions da;
  auto* da_cmd = app.add_subcommand("dump-attn", "Per-word cross-attention maps for one image");
  add_config_flags(da_cmd, da.config);
  da_cmd->add_option("--checkpoint", da.checkpoint, "Checkpoint")->required();
  da_cmd->add_option("--out", da.out, "Output file");
  da_cmd->add_option("input", da.input, "Image or feature file")->required();

  swcap::ScoreOptions sc;
  auto* score_cmd = app.add_subcommand("score", "Score candidate captions against references");
  score_cmd->add_option("--candidates", sc.candidates, "JSON lines {image_id, caption}")->required();
  score_cmd->add_option("--references", sc.references, "JSON lines {image_id, captions}")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*gen_cmd) return swcap::run_gen_synthetic(gen, std::cout);
    if (*xe_cmd) return swcap::run_train_xe(xe, std::cout);
    if (*scst_cmd) return swcap::run_train_scst(scst, init, std::cout);
    if (*cap_cmd) return swcap::run_caption(cap, std::cout);
    if (*eval_cmd) return swcap::run_eval(ev, std::cout);
    if (*da_cmd) return swcap::run_dump_attn(da, std::cout);
    if (*score_cmd) return swcap::run_score(sc, std::cout);
  } catch (const swcap::Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
