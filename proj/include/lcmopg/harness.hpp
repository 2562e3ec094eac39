#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "lcmopg/trainer.hpp"

namespace lcmopg {

/// One experiment: environment, training configuration, evaluation protocol
/// and run count. Serialized as sectioned key = value text.
struct ExperimentSpec {
  std::string env = "dst-convex";
  int runs = 5;
  std::uint64_t seed = 0;
  std::string output;  // relative paths resolve against output_root()
  TrainConfig train;
  int eval_episodes_per_latent = 1;  // final evaluation of the best policy

  bool operator==(const ExperimentSpec& other) const;
};

/// Flat "section.key" -> value view of a spec, in serialization order.
std::vector<std::pair<std::string, std::string>> spec_to_entries(const ExperimentSpec& spec);

/// Errors name the offending field.
ExperimentSpec parse_spec(std::istream& is);
ExperimentSpec parse_spec_file(const std::filesystem::path& path);
void write_spec(std::ostream& os, const ExperimentSpec& spec);

/// "section.key=value" or "key=value" when the key is unambiguous.
void apply_override(ExperimentSpec& spec, const std::string& assignment);

/// Appendix-table hyperparameters for an environment id.
ExperimentSpec paper_preset(const std::string& env_id);
std::vector<std::string> preset_env_ids();

ReturnVector default_reference_point(const std::string& env_id);
double default_hv_scale(const std::string& env_id);

/// LCMOPG_OUTPUT_ROOT, or "runs" when unset.
std::filesystem::path output_root();

struct RunRecord {
  int run = 0;
  std::uint64_t seed = 0;
  TrainResult train;
  EvalResult final_eval;  // best policy on n_lat_test latents
  double seconds = 0.0;
};

struct ExperimentResult {
  std::vector<RunRecord> runs;
  // Best per-iteration test HV of each run (the reported score).
  double mean_best_hv = 0.0;
  double std_best_hv = 0.0;  // population standard deviation
  // Best policy re-evaluated on fresh latents.
  double mean_hv = 0.0;
  double std_hv = 0.0;
};

/// Seed of run r, derived from the master seed.
std::uint64_t run_seed(std::uint64_t master, int run);

struct RunOptions {
  std::size_t threads = 1;
  bool write_files = true;
  std::ostream* log = nullptr;  // progress lines, one per run
  int log_every = 0;            // also log every n-th iteration (0 = never)
};

/// Evaluates the best policy of each run on n_lat_test latents; writes
/// <output>/run_<r>/{spec.txt, metrics.csv, best_policy.txt, pf.csv}.
ExperimentResult run_experiment(const ExperimentSpec& spec, const RunOptions& options = {});
RunRecord run_single(const ExperimentSpec& spec, int run, const RunOptions& options = {});

}  // namespace lcmopg
