#include <cstdint>
#include <iostream>

#include <omp.h>

#include <CLI11.hpp>

#include "toolpose/commands.hpp"
#include "toolpose/version.hpp"

using namespace toolpose;

int main(int argc, char** argv) {
  CLI::App app{"Articulated surgical-tool pose toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  int jobs = 0;
  app.add_option("--jobs", jobs, "Worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);

  SimgenArgs sim;
  auto* simgen = app.add_subcommand("simgen", "Generate a synthetic sequence with ground truth");
  simgen->add_option("--config", sim.config, "Scene config JSON");
  simgen->add_option("--seed", sim.seed, "Random seed (overrides config)");
  simgen->add_option("--frames", sim.frames, "Frame count (overrides config)")->check(CLI::PositiveNumber);
  simgen->add_option("--out", sim.out, "Output dataset directory")->required();

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "PnP-RANSAC poses from stored correspondence maps");
  estimate->add_option("dataset", est.dataset, "Dataset directory")->required();
  estimate->add_option("--config", est.config, "Estimate config JSON");
  estimate->add_option("--seed", est.seed, "Random seed (overrides config)");
  estimate->add_option("--noise-sigma", est.noise_sigma, "Pixel noise added to correspondences");
  estimate->add_option("--out", est.out, "Predictions file (JSON lines)")->required();

  EvaluateArgs ev;
  auto* evaluate = app.add_subcommand("evaluate", "Occlusion-aware pose AP and detection AP");
  evaluate->add_option("dataset", ev.dataset, "Dataset directory")->required();
  evaluate->add_option("predictions", ev.predictions, "Predictions file")->required();
  evaluate->add_option("--config", ev.config, "Evaluation config JSON");
  evaluate->add_option("--out", ev.out, "Report JSON (a .txt twin is written beside it)")->required();

  AdaptArgs ad;
  auto* adapt = app.add_subcommand("adapt", "Pseudo-label adaptation rounds");
  adapt->add_option("dataset", ad.dataset, "Dataset directory")->required();
  adapt->add_option("--config", ad.config, "Adaptation config JSON");
  adapt->add_option("--seed", ad.seed, "Random seed (overrides config)");
  adapt->add_option("--noise-sigma", ad.noise_sigma, "Estimator correspondence noise");
  adapt->add_option("--rounds", ad.rounds, "Number of rounds")->check(CLI::PositiveNumber);
  adapt->add_option("--detections", ad.detections, "Detections JSON lines (default: simulated)");
  adapt->add_option("--estimates", ad.estimates, "Precomputed pose estimates (default: render oracle)");
  adapt->add_option("--out", ad.out, "Output directory")->required();

  LossesArgs lo;
  auto* losses = app.add_subcommand("losses", "Evaluate the training losses on stored predictions");
  losses->add_option("predictions", lo.predictions, "Loss predictions file (JSON lines)")->required();
  losses->add_option("dataset", lo.dataset, "Dataset directory")->required();
  losses->add_option("--config", lo.config, "Loss weights config JSON");
  losses->add_flag("--emit-oracle", lo.emit_oracle, "Write ground-truth predictions to the predictions path");
  losses->add_option("--out", lo.out, "Report JSON");
  losses->callback([&] {
    if (!lo.emit_oracle && lo.out.empty()) throw CLI::RequiredError("--out");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }
  if (jobs > 0) omp_set_num_threads(jobs);

  if (*simgen) return cmd_simgen(sim);
  if (*estimate) return cmd_estimate(est);
  if (*evaluate) return cmd_evaluate(ev);
  if (*adapt) return cmd_adapt(ad);
  if (*losses) return cmd_losses(lo);
  return kExitValidation;
}
