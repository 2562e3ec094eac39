#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <sstream>

#include "lcmopg/trainer.hpp"
#include "test_util.hpp"

using namespace lcmopg;

namespace {

TrainConfig small_dst(Variant v = Variant::PG) {
  TrainConfig c;
  c.variant = v;
  c.n_lat_train = 40;
  c.n_lat_test = 40;
  c.width = 16;
  c.k_nn = 3;
  c.iterations = 4;
  c.reference = Vector{{0.0, -19.0}};
  c.seed = 11;
  return c;
}

// DST whose rewards turn NaN once a shared episode budget is spent.
class PoisonedDst final : public Environment {
 public:
  PoisonedDst(std::shared_ptr<std::atomic<int>> budget)
      : inner_(default_dst_config("convex")), budget_(std::move(budget)) {}
  const EnvDescriptor& descriptor() const override { return inner_.descriptor(); }
  Vector reset(Rng& rng) override {
    poisoned_ = budget_->fetch_sub(1) <= 0;
    return inner_.reset(rng);
  }
  StepResult step(const Action& a, Rng& rng) override {
    StepResult r = inner_.step(a, rng);
    if (poisoned_) r.reward[0] = std::nan("");
    return r;
  }
  Vector features(const Vector& s) const override { return inner_.features(s); }
  std::unique_ptr<Environment> clone() const override { return std::make_unique<PoisonedDst>(*this); }

 private:
  DeepSeaTreasure inner_;
  std::shared_ptr<std::atomic<int>> budget_;
  bool poisoned_ = false;
};

}  // namespace

TEST_CASE("variant names") {
  CHECK(parse_variant("pg") == Variant::PG);
  CHECK(parse_variant("pg-v") == Variant::PGV);
  CHECK(to_string(Variant::PGV) == "pg-v");
  CHECK_THROWS(parse_variant("ppo"));
}

TEST_CASE("config validation names the field") {
  const auto desc = make_env_factory("dst-convex")()->descriptor();
  TrainConfig c = small_dst();
  CHECK_NOTHROW(validate(c, desc));
  c.k_nn = 40;
  CHECK_THROWS_WITH_AS(validate(c, desc), doctest::Contains("k"), ContractViolation);
  c = small_dst();
  c.reference = Vector::Zero(3);
  CHECK_THROWS_AS(validate(c, desc), ContractViolation);
  c = small_dst();
  c.gamma = 0.0;
  CHECK_THROWS_WITH_AS(validate(c, desc), doctest::Contains("gamma"), ContractViolation);
}

TEST_CASE("training is deterministic and thread-count independent") {
  const auto factory = make_env_factory("dst-convex");
  TrainConfig c = small_dst();
  const TrainResult a = train_lcmopg(c, factory);
  c.threads = 3;
  const TrainResult b = train_lcmopg(c, factory);
  REQUIRE(a.history.size() == 5);
  REQUIRE(b.history.size() == 5);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].test_hv == b.history[i].test_hv);
    CHECK(a.history[i].loss == b.history[i].loss);
  }
  CHECK(a.best_policy == b.best_policy);
  CHECK(a.final_policy == b.final_policy);
  c.seed = 12;
  const TrainResult d = train_lcmopg(c, factory);
  CHECK_FALSE(d.final_policy == a.final_policy);
}

TEST_CASE("history bookkeeping") {
  const auto factory = make_env_factory("dst-convex");
  const TrainConfig c = small_dst();
  const TrainResult r = train(c, factory);
  CHECK(r.status == TrainStatus::Completed);
  CHECK(r.history.front().iteration == 0);
  double running = r.history.front().test_hv;
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    running = std::max(running, r.history[i].test_hv);
    CHECK(r.history[i].iteration == static_cast<int>(i));
    CHECK(r.history[i].best_hv == running);
  }
  CHECK(r.best_hv == running);
  CHECK(r.history[r.best_iteration].test_hv == r.best_hv);
  // Row 0 is the untouched initial policy.
  TrainConfig z = c;
  z.iterations = 0;
  const TrainResult init = train(z, factory);
  CHECK(init.history.size() == 1);
  CHECK(init.history[0].test_hv == r.history[0].test_hv);

  std::ostringstream os;
  write_history_csv(os, r.history);
  const std::string csv = os.str();
  CHECK(csv.rfind("# lcmopg-metrics 1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + static_cast<long>(r.history.size()));
}

TEST_CASE("callback can stop training early") {
  const auto factory = make_env_factory("dst-convex");
  int calls = 0;
  const TrainResult r = train(small_dst(), factory, [&](const HistoryRow& row) {
    ++calls;
    return row.iteration < 2;
  });
  CHECK(calls == 3);
  CHECK(r.history.size() == 3);
}

TEST_CASE("divergence is caught and the last finite policy is kept") {
  auto budget = std::make_shared<std::atomic<int>>(40 + 5);
  const EnvFactory factory = [budget] { return std::make_unique<PoisonedDst>(budget); };
  const TrainResult r = train(small_dst(), factory);
  CHECK(r.status == TrainStatus::Diverged);
  CHECK(r.message.find("iteration 1") != std::string::npos);
  CHECK(r.history.size() == 1);
  CHECK(r.final_policy.parameters_finite());
  CHECK(r.final_policy == r.best_policy);
}

TEST_CASE("evaluation is deterministic given its stream") {
  Rng rng(70);
  const auto factory = make_env_factory("dst-convex");
  const LatentConditionedPolicy p(policy_config_for(factory()->descriptor(), 3, 10, 16, 3, {}), rng);
  EvalConfig ec;
  ec.n_latents = 50;
  ec.reference = Vector{{0.0, -19.0}};
  ec.seed = 4;
  const EvalResult a = evaluate(p, factory, ec);
  const EvalResult b = evaluate(p, factory, ec);
  CHECK(a.hv == b.hv);
  CHECK(a.latents == b.latents);
  CHECK(a.front.size() >= 1);
  CHECK(a.hv == doctest::Approx(hypervolume_clipped(a.front.points(), ec.reference)));
  for (const auto& e : a.front.entries())
    CHECK(e.latent == a.latents[static_cast<std::size_t>(e.trajectory_id)]);
  std::ostringstream os;
  write_pf_csv(os, a);
  CHECK(os.str().rfind("return_0,return_1,latent_0,latent_1,latent_2\n", 0) == 0);
}

TEST_CASE("rollout buffer minibatches partition the entries") {
  Rng rng(71);
  const auto factory = make_env_factory("dst-convex");
  const PolicyConfig pc = policy_config_for(factory()->descriptor(), 3, 10, 16, 3, {});
  const LatentConditionedPolicy p(pc, rng);
  std::vector<Vector> latents;
  for (int i = 0; i < 30; ++i) latents.push_back(sample_latent(3, rng));
  const auto trajs = rollout_batch(p, factory, latents, 0.99, 20, RolloutMode::Stochastic, 1, 2);
  GeneralizedValueNets nets(pc, 8, 2, rng);
  RolloutBuffer buf;
  std::size_t total = 0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    buf.add(trajs[i], 0, static_cast<int>(i), static_cast<double>(i),
            [&](const Transition& t) { return nets.encode_action(t); });
    total += trajs[i].transitions.size();
  }
  CHECK(buf.size() == total);
  for (const auto& e : buf.entries()) {
    CHECK(e.score == e.trajectory);
    CHECK(e.q_input.size() == 2 + 4);
    CHECK(e.q_input.tail(4).sum() == 1.0);
  }
  const auto batches = buf.minibatches(7, rng);
  std::vector<std::size_t> all;
  for (const auto& b : batches) {
    CHECK(b.size() <= 7);
    all.insert(all.end(), b.begin(), b.end());
  }
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(total);
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
}

TEST_CASE("value nets regress towards trajectory scores") {
  Rng rng(72);
  const auto factory = make_env_factory("lqg2d");
  const PolicyConfig pc = policy_config_for(factory()->descriptor(), 2, 10, 10, 3, {});
  const LatentConditionedPolicy p(pc, rng);
  std::vector<Vector> latents;
  for (int i = 0; i < 20; ++i) latents.push_back(sample_latent(2, rng));
  const auto trajs = rollout_batch(p, factory, latents, 0.9, 10, RolloutMode::Stochastic, 1, 2);
  GeneralizedValueNets nets(pc, 16, 2, rng, 1e-2);
  RolloutBuffer buf;
  for (std::size_t i = 0; i < trajs.size(); ++i)
    buf.add(trajs[i], 0, static_cast<int>(i), 0.5,
            [&](const Transition& t) { return nets.encode_action(t); });
  const Transition& t0 = trajs[0].transitions[0];
  CHECK(nets.encode_action(t0).isApprox(p.to_env_action(t0.unit_action)));
  Rng shuffle(3);
  const auto first = nets.fit(buf, 1, 16, shuffle);
  const auto last = nets.fit(buf, 200, 16, shuffle);
  CHECK(last.first < first.first);
  CHECK(last.second < first.second);
  CHECK(last.first < 1e-2);
  // With a constant target Q and V agree, so corrected scores vanish.
  for (double f : nets.corrected_scores(trajs[0])) CHECK(std::abs(f) < 0.1);
  CHECK(nets.corrected_scores(trajs[0]).size() == trajs[0].transitions.size());
}

TEST_CASE("pg-v trains end to end") {
  const auto factory = make_env_factory("dst-convex");
  TrainConfig c = small_dst(Variant::PGV);
  c.qv_width = 8;
  c.qv_depth = 2;
  const TrainResult r = train_lcmopg_v(c, factory);
  CHECK(r.status == TrainStatus::Completed);
  CHECK(r.history.size() == 5);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i].value_loss > 0.0);
  CHECK_THROWS_AS(train_lcmopg(c, factory), ContractViolation);
}
