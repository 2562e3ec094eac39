#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "lcmopg/harness.hpp"
#include "lcmopg/lqg_oracle.hpp"

using namespace lcmopg;

namespace {

ReturnVector parse_point(const std::string& text) {
  std::string s = text;
  for (char& ch : s)
    if (ch == ',') ch = ' ';
  std::istringstream is(s);
  std::vector<double> v;
  for (double x; is >> x;) v.push_back(x);
  if (!is.eof() || v.empty()) throw ContractViolation("cannot parse point '" + text + "'");
  return Eigen::Map<ReturnVector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Numeric CSV rows; a first line that does not parse is treated as a header.
std::vector<std::vector<double>> read_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    bool ok = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        ok = false;
        break;
      }
    }
    if (!ok) {
      if (first) {
        first = false;
        continue;
      }
      throw ContractViolation("non-numeric CSV row: " + line);
    }
    first = false;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_points_csv(std::ostream& os, const std::vector<ReturnVector>& pts,
                      const std::vector<Vector>* extra, const std::string& extra_name) {
  if (pts.empty()) return;
  for (Eigen::Index i = 0; i < pts.front().size(); ++i) os << (i ? "," : "") << "return_" << i;
  if (extra)
    for (Eigen::Index j = 0; j < (*extra).front().size(); ++j) os << ',' << extra_name << '_' << j;
  os << '\n' << std::setprecision(17);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    for (Eigen::Index i = 0; i < pts[k].size(); ++i) os << (i ? "," : "") << pts[k][i];
    if (extra)
      for (Eigen::Index j = 0; j < (*extra)[k].size(); ++j) os << ',' << (*extra)[k][j];
    os << '\n';
  }
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-conditioned multi-objective policy gradient"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train policies and report best HV over runs");
  std::string env_id, preset = "paper", spec_file, variant, output;
  std::vector<std::string> overrides;
  int runs = 0, log_every = 0;
  long long seed = -1;
  double beta = -1.0;
  std::size_t threads = 0;
  bool dry_run = false;
  train_cmd->add_option("--env", env_id, "Environment id");
  train_cmd->add_option("--preset", preset, "Preset name (paper)");
  train_cmd->add_option("--spec", spec_file, "Spec file; replaces the preset");
  train_cmd->add_option("--override", overrides, "section.key=value (repeatable)");
  train_cmd->add_option("--runs", runs, "Number of independent runs");
  train_cmd->add_option("--seed", seed, "Master seed");
  train_cmd->add_option("--beta", beta, "Bonus coefficient");
  train_cmd->add_option("--variant", variant, "pg or pg-v");
  train_cmd->add_option("--output", output, "Output directory");
  train_cmd->add_option("--threads", threads, "Rollout threads (0 = all cores)");
  train_cmd->add_option("--log-every", log_every, "Print every n-th iteration");
  train_cmd->add_flag("--dry-run", dry_run, "Print the resolved spec and exit");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a policy checkpoint");
  std::string checkpoint, eval_env, ref_text, pf_out;
  int n_lat = 0, episodes = 1, max_steps = 0;
  double gamma = -1.0;
  long long eval_seed = 0;
  eval_cmd->add_option("--checkpoint", checkpoint, "Policy checkpoint")->required();
  eval_cmd->add_option("--env", eval_env, "Environment id")->required();
  eval_cmd->add_option("--n-lat", n_lat, "Number of latents (default: preset n_lat_test)");
  eval_cmd->add_option("--episodes", episodes, "Episodes per latent");
  eval_cmd->add_option("--gamma", gamma, "Discount (default: preset)");
  eval_cmd->add_option("--max-steps", max_steps, "Episode cap (default: preset test cap)");
  eval_cmd->add_option("--ref", ref_text, "Reference point, comma separated");
  eval_cmd->add_option("--seed", eval_seed, "Seed for latents and environment noise");
  eval_cmd->add_option("--out", pf_out, "PF CSV path (default stdout)");
  eval_cmd->add_option("--threads", threads, "Rollout threads");

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "LQG ground-truth Pareto front");
  std::string oracle_env = "lqg2d", oracle_out;
  double step = 0.01;
  int divisions = 100, oracle_eps = 2000;
  long long oracle_seed = 0;
  oracle_cmd->add_option("--env", oracle_env, "lqg2d, lqg3d, lqg2d-noisy, lqg3d-noisy");
  oracle_cmd->add_option("--step", step, "2D weight grid step");
  oracle_cmd->add_option("--divisions", divisions, "3D simplex divisions");
  oracle_cmd->add_option("--episodes", oracle_eps, "Episodes per weight when noisy");
  oracle_cmd->add_option("--seed", oracle_seed, "Noise seed");
  oracle_cmd->add_option("--out", oracle_out, "PF CSV path (default stdout)");
  oracle_cmd->add_option("--threads", threads, "Worker threads");

  // exact-pf
  auto* exact_cmd = app.add_subcommand("exact-pf", "Deep Sea Treasure shortest-path front");
  std::string exact_env = "dst-convex", exact_out;
  double exact_gamma = -1.0;
  exact_cmd->add_option("--env", exact_env, "dst-convex or dst-original");
  exact_cmd->add_option("--gamma", exact_gamma, "Discount (default: preset)");
  exact_cmd->add_option("--out", exact_out, "CSV path (default stdout)");

  // hv
  auto* hv_cmd = app.add_subcommand("hv", "Hypervolume of a CSV point set");
  std::string hv_in, hv_ref;
  int columns = 0;
  double scale = 1.0;
  hv_cmd->add_option("--input", hv_in, "CSV file (default stdin)");
  hv_cmd->add_option("--ref", hv_ref, "Reference point, comma separated")->required();
  hv_cmd->add_option("--columns", columns, "Use the first n columns (default: ref size)");
  hv_cmd->add_option("--scale", scale, "Divide the result by this value");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) {
      ExperimentSpec spec;
      if (!spec_file.empty()) {
        spec = parse_spec_file(spec_file);
      } else {
        if (env_id.empty()) throw ContractViolation("--env or --spec is required");
        if (preset != "paper") throw ContractViolation("unknown preset '" + preset + "'");
        spec = paper_preset(env_id);
      }
      if (!env_id.empty() && env_id != spec.env) throw ContractViolation("--env disagrees with spec");
      for (const auto& o : overrides) apply_override(spec, o);
      if (runs > 0) spec.runs = runs;
      if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
      if (beta >= 0.0) spec.train.beta = beta;
      if (!variant.empty()) spec.train.variant = parse_variant(variant);
      if (!output.empty()) spec.output = output;
      validate(spec.train, make_env_factory(spec.env, spec.seed)()->descriptor());
      if (dry_run) {
        write_spec(std::cout, spec);
        return 0;
      }
      RunOptions opts;
      opts.threads = threads;
      opts.log = &std::cout;
      opts.log_every = log_every;
      const ExperimentResult res = run_experiment(spec, opts);
      std::cout << std::setprecision(6) << "best test HV over " << res.runs.size()
                << " runs: " << res.mean_best_hv << " +- " << res.std_best_hv << '\n'
                << "best policy re-evaluated: " << res.mean_hv << " +- " << res.std_hv << '\n';
    } else if (*eval_cmd) {
      std::ifstream in(checkpoint);
      if (!in) throw std::runtime_error("cannot open checkpoint " + checkpoint);
      const LatentConditionedPolicy policy = read_policy(in);
      const ExperimentSpec spec = paper_preset(eval_env);
      const EnvFactory factory = make_env_factory(eval_env, 0);
      const EnvDescriptor desc = factory()->descriptor();
      const PolicyConfig& pc = policy.config();
      if (pc.state_dim != desc.state_dim ||
          (desc.discrete ? pc.head != HeadKind::Categorical || pc.num_actions != desc.num_actions
                         : pc.head != HeadKind::Beta || pc.action_dim() != desc.action_lower.size()))
        throw ContractViolation("checkpoint does not match the environment's spaces");
      EvalConfig ec;
      ec.n_latents = n_lat > 0 ? n_lat : spec.train.n_lat_test;
      ec.episodes_per_latent = episodes;
      ec.gamma = gamma > 0.0 ? gamma : spec.train.gamma;
      ec.max_steps = max_steps > 0 ? max_steps : spec.train.max_len_test;
      ec.reference = ref_text.empty() ? spec.train.reference : parse_point(ref_text);
      ec.hv_scale = spec.train.hv_scale;
      ec.seed = static_cast<std::uint64_t>(eval_seed);
      ec.threads = threads;
      const EvalResult res = evaluate(policy, factory, ec);
      std::ofstream file;
      write_pf_csv(open_out(pf_out, file), res);
      std::cerr << std::setprecision(10) << "HV " << res.hv << " (" << res.front.size()
                << " nondominated of " << res.returns.size() << ")\n";
    } else if (*oracle_cmd) {
      OracleConfig oc;
      if (oracle_env.rfind("lqg2d", 0) == 0) oc.env.dim = 2;
      else if (oracle_env.rfind("lqg3d", 0) == 0) oc.env.dim = 3;
      else throw ContractViolation("oracle: unknown environment " + oracle_env);
      if (oracle_env.ends_with("-noisy")) oc.env.sigma = 1.0;
      oc.episodes_per_weight = oracle_eps;
      oc.seed = static_cast<std::uint64_t>(oracle_seed);
      const auto grid = oc.env.dim == 2 ? weight_grid_2d(step) : weight_grid_3d(divisions);
      const OracleResult res = oracle_pf(oc, grid, threads);
      std::vector<ReturnVector> pts;
      std::vector<Vector> ws;
      for (const auto& e : res.front.entries()) {
        pts.push_back(e.point);
        ws.push_back(e.latent);
      }
      std::ofstream file;
      write_points_csv(open_out(oracle_out, file), pts, &ws, "weight");
      std::cerr << std::setprecision(10) << "HV " << lqg_normalized_hv(pts, oc.env.dim) << " ("
                << pts.size() << " nondominated of " << grid.size() << " weights)\n";
    } else if (*exact_cmd) {
      const ExperimentSpec spec = paper_preset(exact_env);
      if (exact_env != "dst-convex" && exact_env != "dst-original")
        throw ContractViolation("exact-pf: environment must be dst-convex or dst-original");
      const double g = exact_gamma > 0.0 ? exact_gamma : spec.train.gamma;
      const ParetoArchive pf =
          dst_exact_pf(default_dst_config(exact_env == "dst-convex" ? "convex" : "original"), g);
      std::ofstream file;
      write_points_csv(open_out(exact_out, file), pf.points(), nullptr, "");
      std::cerr << std::setprecision(10) << "HV " << pf.hypervolume(spec.train.reference) << " ("
                << pf.size() << " points)\n";
    } else if (*hv_cmd) {
      const ReturnVector ref = parse_point(hv_ref);
      std::ifstream file;
      std::istream* in = &std::cin;
      if (!hv_in.empty() && hv_in != "-") {
        file.open(hv_in);
        if (!file) throw std::runtime_error("cannot open " + hv_in);
        in = &file;
      }
      const int m = columns > 0 ? columns : static_cast<int>(ref.size());
      if (m != ref.size()) throw ContractViolation("--columns must equal the reference size");
      std::vector<ReturnVector> pts;
      for (const auto& row : read_csv(*in)) {
        if (static_cast<int>(row.size()) < m) throw ContractViolation("CSV row has too few columns");
        pts.push_back(Eigen::Map<const ReturnVector>(row.data(), m));
      }
      std::cout << std::setprecision(12) << hypervolume_clipped(pts, ref) / scale << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
