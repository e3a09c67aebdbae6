#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

#include "emokit/error.h"
#include "emokit/trainer.h"
#include "toy_data.h"

namespace emokit {
namespace {

namespace fs = std::filesystem;

RunConfig toy_config() {
  RunConfig c;
  c.learning_rate = 0.05;
  c.epochs = 10;
  c.batch_size = 16;
  c.seed = 3;
  return c;
}

TinyEncoder tiny(std::size_t width = 32) {
  TinyEncoderOptions o;
  o.width = width;
  o.seed = 1;
  return TinyEncoder(o);
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("emokit_trainer_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CheckpointMeta meta_with(double macro, std::size_t epoch) {
  CheckpointMeta m;
  m.epoch = epoch;
  m.dev_metrics["macro_f1"] = macro;
  m.dev_metrics["micro_f1"] = macro;
  return m;
}

TEST(Trainer, SeparableToyReachesHighMacroF1) {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 400, 1, Split::kTrain, "tr");
  const auto dev = testing::toy_dataset(space, 100, 2, Split::kDev, "dv");
  const auto test = testing::toy_dataset(space, 200, 3, Split::kTest, "te");
  const auto config = toy_config();
  const auto result = fit(train, dev, config, tiny());
  ASSERT_EQ(result.metas.size(), 10u);
  EXPECT_GE(evaluate(result.model, test, config).macro.f1, 0.95);
  EXPECT_LT(result.metas[1].mean_train_loss(), result.metas[0].mean_train_loss());
  EXPECT_LT(result.metas[2].mean_train_loss(), result.metas[1].mean_train_loss());
}

TEST(Trainer, SingleLabelKindAlsoLearns) {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 400, 1);
  const auto test = testing::toy_dataset(space, 200, 3, Split::kTest, "te");
  auto config = toy_config();
  config.problem_kind = ProblemKind::kSingleLabel;
  const auto result = fit(train, Dataset(space, Split::kDev), config, tiny());
  EXPECT_EQ(result.best_epoch, 10u);
  EXPECT_GE(evaluate(result.model, test, config).macro.f1, 0.95);
}

TEST(Trainer, OneEpochGivesOneMeta) {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 40, 1);
  auto config = toy_config();
  config.epochs = 1;
  const auto result = fit(train, testing::toy_dataset(space, 8, 2, Split::kDev, "d"), config, tiny());
  ASSERT_EQ(result.metas.size(), 1u);
  EXPECT_EQ(result.best_epoch, 1u);
  EXPECT_EQ(result.metas[0].train_loss_curve.size(), 3u);
}

TEST(Trainer, RejectsEmptyTrainAndSpaceMismatch) {
  const auto space = testing::toy_space();
  EXPECT_THROW(fit(Dataset(space, Split::kTrain), Dataset(space, Split::kDev), toy_config(), tiny()),
               ConfigError);
  const auto train = testing::toy_dataset(space, 8, 1);
  const Dataset other(LabelSpace("x", {"a", "b"}), Split::kDev);
  EXPECT_THROW(fit(train, other, toy_config(), tiny()), SpaceMismatch);
}

TEST(Trainer, ReproducibleLossCurve) {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 64, 1);
  const auto dev = testing::toy_dataset(space, 16, 2, Split::kDev, "d");
  auto config = toy_config();
  config.epochs = 3;
  const auto a = fit(train, dev, config, tiny());
  const auto b = fit(train, dev, config, tiny());
  std::ostringstream sa, sb;
  write_loss_curve(sa, a.metas);
  write_loss_curve(sb, b.metas);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(SelectBest, Examples) {
  EXPECT_EQ(select_best({meta_with(0.3, 1), meta_with(0.5, 2), meta_with(0.4, 3)},
                        SelectionMetric::kMacroF1), 2u);
  EXPECT_EQ(select_best({meta_with(0.5, 1), meta_with(0.5, 2)}, SelectionMetric::kMacroF1), 1u);
  EXPECT_EQ(select_best({meta_with(0.1, 1)}, SelectionMetric::kMacroF1), 1u);
}

TEST(SelectBest, FollowsPermutation) {
  std::vector<double> values = {0.11, 0.52, 0.37, 0.49, 0.05};
  std::vector<std::size_t> perm(values.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  do {
    std::vector<CheckpointMeta> metas;
    for (auto i : perm) metas.push_back(meta_with(values[i], metas.size() + 1));
    const auto best = select_best(metas, SelectionMetric::kMacroF1);
    EXPECT_EQ(perm[best - 1], 1u);
  } while (std::next_permutation(perm.begin(), perm.end()));
}

TEST(Decide, Examples) {
  RunConfig c;
  c.threshold = 0.3;
  const std::vector<double> a = {0.9, 0.2, 0.4};
  EXPECT_EQ(decide(a, c), (LabelSet{0, 2}));
  const std::vector<double> b = {0.1, 0.2, 0.15};
  EXPECT_EQ(decide(b, c), (LabelSet{1}));
  c.threshold = 0.5;
  const std::vector<double> d = {0.5, 0.5, 0.1};
  EXPECT_EQ(decide(d, c), (LabelSet{0, 1}));
  c.problem_kind = ProblemKind::kSingleLabel;
  EXPECT_EQ(decide(d, c), (LabelSet{0}));
}

TEST(Decide, NeverEmpty) {
  Rng rng(1);
  RunConfig c;
  c.threshold = 0.99;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> s(7);
    for (auto& x : s) x = rng.next_unit();
    EXPECT_FALSE(decide(s, c).empty());
  }
}

TEST(Predict, ScoresAreProbabilities) {
  const auto space = testing::toy_space();
  const Classifier model(tiny().clone(), space, ProblemKind::kSingleLabel, 4);
  const std::vector<std::string> texts = {"angercue1 the", "joycue2 so", ""};
  RunConfig c;
  c.problem_kind = ProblemKind::kSingleLabel;
  for (const auto& row : predict(model, texts, c)) {
    EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-12);
  }
  c.problem_kind = ProblemKind::kMultiLabel;
  const auto a = predict(model, texts, c);
  for (const auto& row : a) {
    for (double x : row) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_EQ(a, predict(model, texts, c));
}

void check_head_gradient(ProblemKind kind) {
  const auto space = testing::toy_space();
  Classifier model(tiny(8).clone(), space, kind, 9);
  Rng rng(2);
  for (double& w : model.head().weights.data()) w = 0.5 * rng.next_gaussian();
  for (double& b : model.head().bias) b = 0.1 * rng.next_gaussian();
  const std::vector<std::string> texts = {"angercue1 joycue2 the", "fearcue3 so", "sadnesscue4 a"};
  const std::vector<LabelSet> gold = {{0, 1}, {2}, {3}};
  model.zero_grad();
  model.batch_loss(texts, gold, true);
  const auto analytic_w = model.head().weight_grads.data();
  const auto analytic_b = model.head().bias_grads;
  const double h = 1e-6;
  auto check = [&](double& param, double analytic) {
    const double saved = param;
    param = saved + h;
    const double up = model.batch_loss(texts, gold, false);
    param = saved - h;
    const double down = model.batch_loss(texts, gold, false);
    param = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-6});
    EXPECT_LE(std::abs(numeric - analytic) / scale, 1e-4) << numeric << " vs " << analytic;
  };
  auto& w = model.head().weights.data();
  for (std::size_t i = 0; i < w.size(); ++i) check(w[i], analytic_w[i]);
  auto& b = model.head().bias;
  for (std::size_t i = 0; i < b.size(); ++i) check(b[i], analytic_b[i]);
}

TEST(Gradients, HeadMatchesFiniteDifferencesMultiLabel) {
  check_head_gradient(ProblemKind::kMultiLabel);
}

TEST(Gradients, HeadMatchesFiniteDifferencesSingleLabel) {
  check_head_gradient(ProblemKind::kSingleLabel);
}

TEST(Gradients, EncoderMatchesFiniteDifferences) {
  const auto space = testing::toy_space();
  Classifier model(tiny(8).clone(), space, ProblemKind::kMultiLabel, 9);
  const std::vector<std::string> texts = {"angercue1 joycue2", "fearcue3 so"};
  const std::vector<LabelSet> gold = {{0, 1}, {2}};
  model.zero_grad();
  model.batch_loss(texts, gold, true);
  auto params = model.parameters();
  ASSERT_FALSE(params.empty());
  auto& enc = params.front();
  const auto* tiny_enc = dynamic_cast<const TinyEncoder*>(&model.encoder());
  ASSERT_NE(tiny_enc, nullptr);
  const auto buckets = tiny_enc->token_buckets("angercue1");
  ASSERT_EQ(buckets.size(), 1u);
  const std::vector<double> analytic(enc.grads.begin(), enc.grads.end());
  for (std::size_t d = 0; d < 8; ++d) {
    const std::size_t idx = buckets[0] * 8 + d;
    const double saved = enc.values[idx];
    enc.values[idx] = saved + 1e-6;
    const double up = model.batch_loss(texts, gold, false);
    enc.values[idx] = saved - 1e-6;
    const double down = model.batch_loss(texts, gold, false);
    enc.values[idx] = saved;
    const double numeric = (up - down) / 2e-6;
    const double scale = std::max({std::abs(numeric), std::abs(analytic[idx]), 1e-6});
    EXPECT_LE(std::abs(numeric - analytic[idx]) / scale, 1e-4);
  }
}

TEST(RunConfig, JsonRoundTripAndHash) {
  RunConfig c;
  c.learning_rate = 2e-5;
  c.epochs = 10;
  c.weight_decay = 0.01;
  c.warmup_steps = 500;
  c.batch_size = 16;
  c.seed = 11711;
  c.scheduler = Scheduler::kLinearWarmup;
  const auto back = RunConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_DOUBLE_EQ(back.learning_rate, 2e-5);
  EXPECT_EQ(back.seed, 11711u);
  EXPECT_EQ(back.hash(), c.hash());
  EXPECT_EQ(c.hash().size(), 16u);
  RunConfig d = c;
  d.seed = 1;
  EXPECT_NE(d.hash(), c.hash());
}

TEST(RunConfig, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(RunConfig::from_json(R"({"learning_rat": 0.1})"), ConfigError);
  RunConfig c;
  c.learning_rate = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.threshold = 1.5;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Scheduler, LinearWarmupShape) {
  RunConfig c;
  c.learning_rate = 1.0;
  c.scheduler = Scheduler::kLinearWarmup;
  c.warmup_steps = 10;
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 0, 110), 0.0);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 5, 110), 0.5);
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 10, 110), 1.0);
  EXPECT_NEAR(scheduled_lr(c, 60, 110), 0.5, 1e-12);
  EXPECT_GE(scheduled_lr(c, 109, 110), 0.0);
  c.scheduler = Scheduler::kNone;
  EXPECT_DOUBLE_EQ(scheduled_lr(c, 50, 110), 1.0);
}

TEST(Checkpoints, LayoutAndReload) {
  const auto root = temp_dir("ckpt");
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 64, 1);
  const auto dev = testing::toy_dataset(space, 16, 2, Split::kDev, "d");
  auto config = toy_config();
  config.epochs = 3;
  FitOptions opts;
  opts.checkpoint_root = root;
  opts.keep_all_checkpoints = true;
  const auto result = fit(train, dev, config, tiny(), opts);
  const auto run = root / config.hash();
  for (int e = 1; e <= 3; ++e) {
    const auto dir = run / ("epoch_" + std::to_string(e));
    EXPECT_TRUE(fs::exists(dir / "encoder.bin"));
    EXPECT_TRUE(fs::exists(dir / "head.json"));
    EXPECT_TRUE(fs::exists(dir / "meta.json"));
  }
  EXPECT_TRUE(fs::exists(run / "run.json"));
  EXPECT_TRUE(fs::exists(run / "loss.tsv"));

  Classifier reloaded(tiny().clone(), space, ProblemKind::kMultiLabel, 77);
  reloaded.load(run / ("epoch_" + std::to_string(result.best_epoch)));
  const std::vector<std::string> texts = {"angercue1 so", "joycue4 the"};
  EXPECT_EQ(predict(reloaded, texts, config), predict(result.model, texts, config));
  fs::remove_all(root);
}

TEST(Checkpoints, OnlyBestKeptByDefault) {
  const auto root = temp_dir("ckpt_best");
  const auto space = testing::toy_space();
  auto config = toy_config();
  config.epochs = 3;
  FitOptions opts;
  opts.checkpoint_root = root;
  const auto result = fit(testing::toy_dataset(space, 32, 1),
                          testing::toy_dataset(space, 16, 2, Split::kDev, "d"), config, tiny(), opts);
  std::size_t epochs = 0;
  for (const auto& e : fs::directory_iterator(root / config.hash())) epochs += e.is_directory();
  EXPECT_EQ(epochs, 1u);
  EXPECT_TRUE(fs::exists(root / config.hash() / ("epoch_" + std::to_string(result.best_epoch))));
  fs::remove_all(root);
}

TEST(Meta, JsonRoundTrip) {
  CheckpointMeta m;
  m.epoch = 4;
  m.dev_metrics = {{"macro_f1", 0.25}};
  m.train_loss_curve = {1.0, 0.5};
  m.config_hash = "abc";
  const auto back = CheckpointMeta::from_json(m.to_json());
  EXPECT_EQ(back.epoch, 4u);
  EXPECT_EQ(back.train_loss_curve, m.train_loss_curve);
  EXPECT_DOUBLE_EQ(back.mean_train_loss(), 0.75);
}

TEST(Encoder, FactoryAndHash) {
  EXPECT_THROW(make_encoder("nope", {}), ConfigError);
  EXPECT_THROW(make_encoder("bert-base-cased", {}), BackendError);
  auto a = make_encoder("tiny", {});
  auto b = a->clone();
  EXPECT_EQ(a->weight_hash(), b->weight_hash());
  std::stringstream buf;
  a->save(buf);
  TinyEncoderOptions o;
  o.seed = 99;
  auto c = make_encoder("tiny", o);
  EXPECT_NE(c->weight_hash(), a->weight_hash());
  c->load(buf);
  EXPECT_EQ(c->weight_hash(), a->weight_hash());
}

}  // namespace
}  // namespace emokit
