// Acceptance gates. One PASS/FAIL line per criterion; tolerances are pinned
// below. `--criterion N` runs a single criterion.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "lcmopg/harness.hpp"
#include "lcmopg/lqg_oracle.hpp"
#include "lcmopg/neural.hpp"
#include "lcmopg/scoring.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lcmopg;

namespace {

// Table values.
constexpr double kDstConvexHv = 241.73;
constexpr double kDstOriginalHv = 22855.0;
constexpr double kLqg2dHv = 1.1646;
constexpr double kLqg3dHv = 0.8476;
constexpr double kLqg2dNoisyHv = 0.9967;
constexpr double kFtn5Hv = 6920.58;

// Tolerances and gates.
constexpr double kTableRounding2 = 0.005;   // two reported decimals
constexpr double kTableRounding1 = 0.05;    // one reported decimal
constexpr double kExactRel = 1e-9;          // "tolerance 0" up to float rounding
constexpr double kRiccatiResidual = 1e-10;
constexpr double kOracleTol = 0.0005;
constexpr double kNoisyOracleTol = 0.005;
constexpr int kNoisyEpisodes = 2000;
constexpr double kLqg2dPgFraction = 0.96;
constexpr double kLqg2dPgvFraction = 0.93;
constexpr double kLqg3dPgFraction = 0.95;
constexpr double kLqg3dPgvFraction = 0.87;
constexpr double kLqg3dSmokeFraction = 0.85;
constexpr int kLqg3dSmokeIterations = 200;
constexpr double kFtnGeneratedRecovered = 0.90;
constexpr double kFtnLargeFraction = 0.95;
constexpr int kMinecartSmokeIterations = 150;
constexpr int kMinecartSmokeSegments = 3;
constexpr double kMinecartSmokeHv = 60.0;
constexpr double kGradRel = 1e-4;
constexpr double kMcSigmas = 4.0;
constexpr int kUnclippedIterations = 100;
constexpr int kMinSeedsExact = 4;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::size_t g_threads = 1;

std::string num(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

ExperimentResult run(ExperimentSpec spec) {
  RunOptions opt;
  opt.threads = g_threads;
  opt.write_files = false;
  opt.log = &std::cerr;
  return run_experiment(spec, opt);
}

// Best per-iteration test HV of each run; the reported score when training
// and testing use the same number of latents (DST, FTN d=5).
std::vector<double> best_hvs(const ExperimentResult& r) {
  std::vector<double> out;
  for (const auto& run : r.runs) out.push_back(run.train.best_hv);
  return out;
}

// Best policy evaluated on n_lat_test fresh latents; the reported score when
// the evaluation set is larger than the monitoring set (LQG, FTN d>5, Minecart).
std::vector<double> final_hvs(const ExperimentResult& r) {
  std::vector<double> out;
  for (const auto& run : r.runs) out.push_back(run.final_eval.hv);
  return out;
}

std::string list(const std::vector<double>& xs, int prec = 4) {
  std::string s;
  for (double x : xs) s += (s.empty() ? "" : " ") + num(x, prec);
  return s;
}

double mean(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

bool same_hv(double a, double b) { return std::abs(a - b) <= kExactRel * std::abs(b); }

// ---- DST -------------------------------------------------------------------

double dst_target(const std::string& env) {
  const auto spec = paper_preset(env);
  const auto cfg = default_dst_config(env == "dst-convex" ? "convex" : "original");
  return dst_exact_pf(cfg, spec.train.gamma).hypervolume(spec.train.reference);
}

Outcome dst_training(const std::string& env) {
  const double target = dst_target(env);
  const auto hvs = best_hvs(run(paper_preset(env)));
  const int exact = static_cast<int>(std::count_if(hvs.begin(), hvs.end(),
                                                   [&](double h) { return same_hv(h, target); }));
  return {exact >= kMinSeedsExact, env + " exact " + std::to_string(exact) + "/5 (need " +
                                       std::to_string(kMinSeedsExact) + "), HV " + list(hvs, 3) +
                                       ", mean " + num(mean(hvs), 3) + " vs " + num(target, 3)};
}

Outcome criterion1() { return dst_training("dst-convex"); }
Outcome criterion2() { return dst_training("dst-original"); }

Outcome criterion3() {
  bool pass = true;
  std::string detail;
  for (const std::string env : {"dst-convex", "dst-original"}) {
    ExperimentSpec with = paper_preset(env), without = with;
    without.train.beta = 0.0;
    const double m_with = mean(best_hvs(run(with)));
    const double m_without = mean(best_hvs(run(without)));
    pass = pass && m_without < m_with;
    detail += env + " beta=0 " + num(m_without, 3) + " vs beta=" + num(with.train.beta, 1) + " " +
              num(m_with, 3) + "; ";
  }
  return {pass, detail};
}

Outcome criterion4() {
  const double convex = dst_target("dst-convex");
  const double original = dst_target("dst-original");
  const bool pass = std::abs(convex - kDstConvexHv) <= kTableRounding2 &&
                    std::abs(original - kDstOriginalHv) <= kTableRounding1;
  return {pass, "convex " + num(convex, 4) + " (table " + num(kDstConvexHv, 2) + "), original " +
                    num(original, 4) + " (table " + num(kDstOriginalHv, 1) + ")"};
}

// ---- LQG -------------------------------------------------------------------

double oracle_hv(int dim, double sigma = 0.0, int episodes = 1) {
  OracleConfig oc;
  oc.env.dim = dim;
  oc.env.sigma = sigma;
  oc.episodes_per_weight = episodes;
  const auto grid = dim == 2 ? weight_grid_2d() : weight_grid_3d();
  const auto res = oracle_pf(oc, grid, g_threads);
  const auto pts = res.front.points();
  return lqg_normalized_hv(pts, dim);
}

double max_riccati_residual(int dim) {
  std::vector<Matrix> Qs, Rs;
  for (int i = 0; i < dim; ++i) {
    Qs.push_back(lqg_state_cost(dim, 0.1, i));
    Rs.push_back(lqg_action_cost(dim, 0.1, i));
  }
  double worst = 0.0;
  for (const auto& w : dim == 2 ? weight_grid_2d() : weight_grid_3d()) {
    Matrix Q = Matrix::Zero(dim, dim), R = Matrix::Zero(dim, dim);
    for (int i = 0; i < dim; ++i) {
      Q += w[i] * Qs[i];
      R += w[i] * Rs[i];
    }
    const auto sol = solve_riccati(Q, R, 0.9);
    worst = std::max(worst, riccati_residual(sol.S, Q, R, 0.9));
  }
  return worst;
}

Outcome criterion5() {
  const double res = std::max(max_riccati_residual(2), max_riccati_residual(3));
  const double hv2 = oracle_hv(2), hv3 = oracle_hv(3);
  const double noisy = oracle_hv(2, 1.0, kNoisyEpisodes);
  const bool pass = res <= kRiccatiResidual && std::abs(hv2 - kLqg2dHv) <= kOracleTol &&
                    std::abs(hv3 - kLqg3dHv) <= kOracleTol &&
                    std::abs(noisy - kLqg2dNoisyHv) <= kNoisyOracleTol;
  std::ostringstream os;
  os << "max residual " << res << ", 2D " << num(hv2, 5) << ", 3D " << num(hv3, 5)
     << ", noisy 2D " << num(noisy, 5);
  return {pass, os.str()};
}

Outcome lqg_gate(const std::string& env, Variant variant, double fraction, double oracle,
                 int iterations = 0, int runs = 5) {
  ExperimentSpec spec = paper_preset(env);
  spec.train.variant = variant;
  spec.runs = runs;
  if (iterations > 0) spec.train.iterations = iterations;
  const auto hvs = final_hvs(run(spec));
  const double m = mean(hvs);
  return {m >= fraction * oracle, to_string(variant) + " " + std::to_string(spec.train.iterations) +
                                      " it: HV " + list(hvs) + ", mean " + num(m) + " vs " +
                                      num(fraction, 2) + " x " + num(oracle) + " = " +
                                      num(fraction * oracle)};
}

Outcome combine(std::initializer_list<Outcome> parts) {
  Outcome out{true, ""};
  for (const auto& p : parts) {
    out.pass = out.pass && p.pass;
    out.detail += (out.detail.empty() ? "" : "; ") + std::string(p.pass ? "" : "[fail] ") + p.detail;
  }
  return out;
}

Outcome criterion6() {
  const double oracle = oracle_hv(2);
  const Outcome pg = lqg_gate("lqg2d", Variant::PG, kLqg2dPgFraction, oracle);
  const Outcome pgv = lqg_gate("lqg2d", Variant::PGV, kLqg2dPgvFraction, oracle);
  return combine({pg, pgv});
}

Outcome criterion7() {
  const double oracle = oracle_hv(3);
  const Outcome smoke =
      lqg_gate("lqg3d", Variant::PG, kLqg3dSmokeFraction, oracle, kLqg3dSmokeIterations, 1);
  const Outcome pg = lqg_gate("lqg3d", Variant::PG, kLqg3dPgFraction, oracle);
  const Outcome pgv = lqg_gate("lqg3d", Variant::PGV, kLqg3dPgvFraction, oracle);
  return combine({Outcome{smoke.pass, "smoke " + smoke.detail}, pg, pgv});
}

// ---- FTN -------------------------------------------------------------------

std::vector<ReturnVector> discounted_leaves(const std::string& env, std::uint64_t seed) {
  auto e = make_env_factory(env, seed)();
  const auto& ftn = dynamic_cast<const FruitTreeNavigation&>(*e);
  const int d = ftn.config().depth;
  const double g = std::pow(paper_preset(env).train.gamma, d - 1);
  std::vector<ReturnVector> out;
  for (const auto& l : ftn.config().leaf_rewards) out.push_back(g * l);
  return out;
}

int recovered_leaves(const std::vector<ReturnVector>& leaves, const EvalResult& eval) {
  int found = 0;
  for (const auto& l : leaves) {
    for (const auto& p : eval.front.points()) {
      if ((p - l).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, l.cwiseAbs().maxCoeff())) {
        ++found;
        break;
      }
    }
  }
  return found;
}

Outcome criterion8() {
  const ExperimentSpec spec = paper_preset("ftn5");
  const auto leaves = discounted_leaves("ftn5", spec.seed);
  const double target = hypervolume(leaves, spec.train.reference);
  const auto res = run(spec);
  int exact = 0;
  std::vector<double> hvs;
  // Every leaf adds volume of its own, so the exact HV means all leaves were found.
  for (const auto& r : res.runs) {
    hvs.push_back(r.train.best_hv);
    if (same_hv(r.train.best_hv, target)) ++exact;
  }
  const Outcome ref{exact >= kMinSeedsExact && std::abs(target - kFtn5Hv) <= kTableRounding2,
                    "reference table exact " + std::to_string(exact) + "/5, HV " + list(hvs, 2) +
                        " vs " + num(target, 3) + " (table " + num(kFtn5Hv, 2) + ")"};

  ExperimentSpec gen = paper_preset("ftn5-generated");
  gen.runs = 1;
  const auto gen_leaves = discounted_leaves("ftn5-generated", gen.seed);
  const auto gen_res = run(gen);
  const int found = recovered_leaves(gen_leaves, gen_res.runs[0].final_eval);
  const double frac = static_cast<double>(found) / static_cast<double>(gen_leaves.size());
  const Outcome generated{frac >= kFtnGeneratedRecovered,
                          "generated table recovered " + std::to_string(found) + "/" +
                              std::to_string(gen_leaves.size()) + " leaves"};
  return combine({ref, generated});
}

Outcome ftn_single(const std::string& env) {
  ExperimentSpec spec = paper_preset(env);
  spec.runs = 1;
  const double target = hypervolume(discounted_leaves(env, spec.seed), spec.train.reference);
  const double hv = run(spec).runs[0].final_eval.hv;
  return {hv >= kFtnLargeFraction * target, env + " HV " + num(hv, 2) + " vs " +
                                                num(kFtnLargeFraction, 2) + " x " +
                                                num(target, 2) + " (" + num(hv / target, 4) + ")"};
}

Outcome criterion9() { return combine({ftn_single("ftn6"), ftn_single("ftn7")}); }

// ---- Minecart --------------------------------------------------------------

Outcome minecart_properties() {
  const MinecartConfig cfg = default_minecart_config();
  Minecart env(cfg);
  Rng rng(2024);
  std::uniform_int_distribution<int> pick(0, 5);
  int violations = 0, finished = 0, steps = 0;
  for (int ep = 0; ep < 200; ++ep) {
    env.reset(rng);
    for (int t = 0; t < 1000; ++t) {
      int a = pick(rng);
      if (ep % 2 == 0 && t < 6) a = Minecart::kAccelerate;
      const StepResult r = env.step(Action::discrete(a), rng);
      const Vector& s = r.state;
      ++steps;
      const double fuel = cfg.frame_skip * (cfg.fuel_idle +
                                            (a == Minecart::kAccelerate ? cfg.fuel_accelerate : 0.0) +
                                            (a == Minecart::kMine ? cfg.fuel_mine : 0.0));
      const bool ok = s[0] >= 0.0 && s[0] <= 1.0 && s[1] >= 0.0 && s[1] <= 1.0 && s[2] >= 0.0 &&
                      s[2] <= cfg.max_speed && s[3] >= 0.0 && s[3] < 360.0 &&
                      s[4] + s[5] <= cfg.capacity + 1e-12 && r.reward[2] < 0.0 &&
                      std::abs(r.reward[2] - fuel) <= 1e-12 && r.reward[0] >= 0.0 &&
                      r.reward[1] >= 0.0 && (r.done || r.reward.head(2).isZero()) &&
                      (!r.done || r.reward[0] + r.reward[1] <= cfg.capacity + 1e-12);
      if (!ok) ++violations;
      if (r.done) {
        ++finished;
        bool threw = false;
        try {
          env.step(Action::discrete(Minecart::kIdle), rng);
        } catch (const ContractViolation&) {
          threw = true;
        }
        if (!threw) ++violations;
        break;
      }
    }
  }
  return {violations == 0 && finished > 0,
          "properties: " + std::to_string(violations) + " violations over " +
              std::to_string(steps) + " steps, " + std::to_string(finished) + " episodes ended"};
}

Outcome minecart_smoke() {
  ExperimentSpec spec = paper_preset("minecart");
  spec.runs = 1;
  spec.train.iterations = kMinecartSmokeIterations;
  const auto res = run(spec);
  const auto& rec = res.runs[0];
  // Running maximum at the segment boundaries must rise between each pair.
  std::vector<double> marks;
  double best = -1.0;
  const int seg = kMinecartSmokeIterations / kMinecartSmokeSegments;
  for (const auto& row : rec.train.history) {
    best = std::max(best, row.test_hv);
    if (row.iteration % seg == 0) marks.push_back(best);
  }
  bool rising = marks.size() == static_cast<std::size_t>(kMinecartSmokeSegments + 1);
  for (std::size_t i = 1; rising && i < marks.size(); ++i) rising = marks[i] > marks[i - 1];
  const double hv = rec.final_eval.hv;
  return {rising && hv >= kMinecartSmokeHv,
          "smoke running max at every " + std::to_string(seg) + " it: " + list(marks, 2) +
              ", final HV " + num(hv, 2) + " (need " + num(kMinecartSmokeHv, 0) + ")"};
}

Outcome minecart_loads() {
  const MinecartConfig cfg = default_minecart_config();
  const auto loads = minecart_full_capacity_loads(cfg);
  bool pass = static_cast<int>(loads.size()) == cfg.full_capacity_points;
  for (const auto& l : loads) pass = pass && std::abs(l.sum() - cfg.capacity) <= 1e-9;
  pass = pass && pareto_filter(loads).size() == loads.size();
  return {pass, "full-capacity loads " + std::to_string(loads.size()) + " (configured " +
                    std::to_string(cfg.full_capacity_points) + "), all nondominated"};
}

Outcome criterion10() { return combine({minecart_properties(), minecart_loads(), minecart_smoke()}); }

// ---- Property suites ---------------------------------------------------------

Outcome dominance_laws() {
  Rng rng(11);
  int bad = 0;
  for (int m = 2; m <= 6; ++m) {
    const auto pts = testutil::grid_points(30, m, 3, rng);
    for (const auto& a : pts) {
      if (dominates(a, a)) ++bad;
      for (const auto& b : pts) {
        if (dominates(a, b) && dominates(b, a)) ++bad;
        for (const auto& c : pts)
          if (dominates(a, b) && dominates(b, c) && !dominates(a, c)) ++bad;
      }
    }
  }
  return {bad == 0, "dominance laws " + std::to_string(bad) + " violations"};
}

Outcome pareto_vs_brute_force() {
  Rng rng(12);
  std::uniform_int_distribution<int> size(1, 200);
  int bad = 0, trials = 0;
  for (int m = 2; m <= 6; ++m) {
    for (int t = 0; t < 20; ++t, ++trials) {
      const int n = size(rng);
      const auto pts = t % 2 ? testutil::grid_points(n, m, 4, rng) : testutil::random_points(n, m, rng);
      if (pareto_filter(pts) != oracle::brute_force_front(pts)) ++bad;
    }
  }
  return {bad == 0, "pareto_filter " + std::to_string(trials - bad) + "/" + std::to_string(trials)};
}

Outcome hv_vs_monte_carlo() {
  Rng rng(13);
  int bad = 0, trials = 0;
  double worst_sigma = 0.0;
  for (int m = 2; m <= 6; ++m) {
    for (int t = 0; t < 4; ++t, ++trials) {
      const auto pts = testutil::random_points(25, m, rng, 0.1, 1.0);
      const ReturnVector ref = ReturnVector::Zero(m);
      const double exact = hypervolume(pts, ref);
      const auto mc = hypervolume_mc(pts, ref, 200000, 100 + trials);
      const double z = std::abs(exact - mc.estimate) / mc.standard_error;
      worst_sigma = std::max(worst_sigma, z);
      if (z > kMcSigmas) ++bad;
      const auto few = testutil::random_points(8, m, rng, 0.1, 1.0);
      if (testutil::rel_err(hypervolume(few, ref), oracle::hv_inclusion_exclusion(few, ref)) > 1e-12)
        ++bad;
    }
  }
  return {bad == 0, "HV vs MC worst " + num(worst_sigma, 2) + " sigma"};
}

Outcome gradients() {
  Rng rng(14);
  double worst = 0.0;
  // MLP parameters for both hidden activations.
  for (const Activation act : {Activation::Selu, Activation::Tanh}) {
    const Mlp net = Mlp::random({4, 7, 5, 3}, {act, act, Activation::Identity}, rng, 0.5);
    Matrix x(4, 6), w(3, 6);
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n(rng);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = n(rng);
    Mlp::Tape tape;
    net.forward(x, tape);
    Vector grad = Vector::Zero(net.num_parameters());
    net.backward(tape, w, grad);
    auto loss = [&](const Vector& p) {
      Mlp copy = net;
      copy.parameters() = p;
      return (copy.forward(x).array() * w.array()).sum();
    };
    worst = std::max(worst, oracle::grad_error(grad, oracle::numeric_grad(net.parameters(), loss)));
  }
  // Beta log-density with respect to (alpha, beta).
  {
    const BetaParams h{Vector{{1.5, 3.0, 7.0}}, Vector{{2.5, 1.2, 4.0}}};
    const Vector a{{0.3, 0.8, 0.55}};
    Vector da, db;
    beta_log_prob_grad(h, a, da, db);
    Vector ab(6), an(6);
    ab << h.alpha, h.beta;
    an << da, db;
    auto f = [&](const Vector& v) { return beta_log_prob({v.head(3), v.tail(3)}, a); };
    worst = std::max(worst, oracle::grad_error(an, oracle::numeric_grad(ab, f)));
  }
  // Policy loss for categorical, Beta and embedded-state policies.
  struct Case {
    std::string env;
    int latent_dim, width;
    std::vector<int> embedding;
    int steps;
  };
  for (const Case& c : {Case{"dst-convex", 3, 12, {}, 20}, Case{"lqg2d", 2, 10, {}, 10},
                        Case{"ftn5", 5, 16, {10, 20}, 5}}) {
    const auto factory = make_env_factory(c.env);
    const auto cfg = policy_config_for(factory()->descriptor(), c.latent_dim, 10, c.width, 3, c.embedding);
    const LatentConditionedPolicy policy(cfg, rng);
    std::vector<Vector> latents;
    for (int i = 0; i < 4; ++i) latents.push_back(sample_latent(c.latent_dim, rng));
    const auto trajs = rollout_batch(policy, factory, latents, 0.99, c.steps, RolloutMode::Stochastic, 15, 1);
    std::vector<WeightedTrajectory> batch;
    std::normal_distribution<double> n(0.0, 1.0);
    for (const auto& t : trajs) batch.push_back({&t, n(rng), {}});
    const auto lg = policy_loss_and_grad(policy, batch);
    auto f = [&](const Vector& theta) {
      LatentConditionedPolicy p = policy;
      p.set_parameters(theta);
      double loss = 0.0;
      for (const auto& wt : batch)
        for (const auto& tr : wt.trajectory->transitions)
          loss -= wt.weight * p.log_prob_from_head(p.head_one(tr.features, wt.trajectory->latent),
                                                   tr.action, tr.unit_action);
      return loss;
    };
    worst = std::max(worst, oracle::grad_error(lg.grad, oracle::numeric_grad(policy.parameters(), f)));
  }
  return {worst <= kGradRel, "worst gradient error " + num(worst * 1e6, 3) + "e-6"};
}

Outcome scoring_transcriptions() {
  Rng rng(16);
  double worst = 0.0;
  int trials = 0;
  for (int m = 2; m <= 6; ++m) {
    for (int t = 0; t < 6; ++t, ++trials) {
      const int n = 20 + 15 * t;
      const auto g = t % 2 ? testutil::grid_points(n, m, 5, rng) : testutil::random_points(n, m, rng);
      const bool med = t % 3 != 0;
      const auto f = compute_scores(g, med ? Centering::Median : Centering::Mean);
      const auto fr = oracle::ref_scores(oracle::to_pts(g), med);
      const int k = 1 + t % 5;
      const auto b = compute_bonuses(g, f, k);
      const auto br = oracle::ref_bonuses(oracle::to_pts(g), fr, k);
      for (std::size_t i = 0; i < g.size(); ++i)
        worst = std::max({worst, std::abs(f[i] - fr[i]), std::abs(b[i] - br[i])});
    }
  }
  return {worst <= 1e-12, "score/bonus transcriptions agree to " + num(worst * 1e15, 1) +
                              "e-15 over " + std::to_string(trials) + " batches"};
}

Outcome clipping_and_invariance() {
  Rng rng(17);
  int bad = 0;
  std::uniform_real_distribution<double> scale(0.1, 50.0), shift(-100.0, 100.0);
  for (const NormalizationMode mode :
       {NormalizationMode::Standard, NormalizationMode::Robust, NormalizationMode::MaxMin}) {
    for (int t = 0; t < 10; ++t) {
      const int m = 2 + t % 4;
      const auto g = testutil::random_points(60, m, rng);
      ScoringConfig sc;
      sc.normalization = mode;
      sc.centering = default_centering(mode);
      sc.k = 3;
      sc.beta = 5.0;
      const auto clipped = score_batch(g, sc);
      for (double x : clipped.final)
        if (!(x >= 0.0)) ++bad;
      auto h = g;
      for (int j = 0; j < m; ++j) {
        const double a = scale(rng), b = shift(rng);
        for (auto& p : h) p[j] = a * p[j] + b;
      }
      const auto n1 = normalize_returns(g, mode), n2 = normalize_returns(h, mode);
      for (std::size_t i = 0; i < g.size(); ++i)
        if ((n1[i] - n2[i]).cwiseAbs().maxCoeff() > 1e-9) ++bad;
    }
  }
  return {bad == 0, "clipping and normalization invariance " + std::to_string(bad) + " violations"};
}

Outcome criterion11() {
  return combine({dominance_laws(), pareto_vs_brute_force(), hv_vs_monte_carlo(), gradients(),
                  scoring_transcriptions(), clipping_and_invariance()});
}

// ---- Stability ---------------------------------------------------------------

// The unclipped loss can push Beta shapes towards zero. With the default
// alpha, beta >= 1 link that never happens, so the regression uses the bare
// alpha, beta > 0 link; a clipped control with the same link must survive.
Outcome criterion12() {
  ExperimentSpec spec = paper_preset("lqg2d");
  spec.train.beta_offset = 0.0;
  spec.train.iterations = kUnclippedIterations;
  ExperimentSpec control = spec;
  spec.train.clip = false;
  const auto res = run(spec);
  int caught = 0;
  std::string detail;
  for (const auto& r : res.runs) {
    const bool stopped = r.train.status == TrainStatus::Diverged &&
                         r.train.history.back().iteration < kUnclippedIterations;
    if (stopped && r.train.best_policy.parameters_finite() &&
        r.train.final_policy.parameters_finite())
      ++caught;
    detail += (detail.empty() ? "" : ", ") + to_string(r.train.status) + "@" +
              std::to_string(r.train.history.back().iteration);
  }
  int control_diverged = 0;
  for (const auto& r : run(control).runs)
    if (r.train.status != TrainStatus::Completed) ++control_diverged;
  const int n = static_cast<int>(res.runs.size());
  return {2 * caught > n && control_diverged == 0,
          "unclipped runs diverged and caught " + std::to_string(caught) + "/" +
              std::to_string(n) + " (" + detail + "); clipped control stopped " +
              std::to_string(control_diverged) + "/" + std::to_string(n)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance gates"};
  int only = 0;
  g_threads = 0;
  app.add_option("--criterion", only, "run a single criterion (1-12)")->check(CLI::Range(1, 12));
  app.add_option("--threads", g_threads, "worker threads (0 = all cores)");
  CLI11_PARSE(app, argc, argv);
  if (g_threads == 0) g_threads = std::max(1u, std::thread::hardware_concurrency());

  const std::map<int, std::function<Outcome()>> criteria = {
      {1, criterion1},  {2, criterion2},  {3, criterion3},   {4, criterion4},
      {5, criterion5},  {6, criterion6},  {7, criterion7},   {8, criterion8},
      {9, criterion9},  {10, criterion10}, {11, criterion11}, {12, criterion12}};

  bool all = true;
  for (const auto& [id, fn] : criteria) {
    if (only && id != only) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s [%.1f s]\n", id, out.pass ? "PASS" : "FAIL",
                out.detail.c_str(), secs);
    std::fflush(stdout);
    all = all && out.pass;
  }
  return all ? 0 : 1;
}
