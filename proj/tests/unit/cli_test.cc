#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "emokit/cli/app.h"
#include "emokit/cli/config.h"
#include "emokit/error.h"
#include "emokit/llmeval.h"
#include "llm_fixture.h"

namespace emokit::cli {
namespace {

namespace fs = std::filesystem;

const fs::path kConfig = fs::path(EMOKIT_CONFIG_DIR) / "example.jsonc";
const fs::path kToy = fs::path(EMOKIT_CONFIG_DIR) / "toy";

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("emokit_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(exit_code(ErrorCategory::kUsage), 2);
  EXPECT_EQ(exit_code(ErrorCategory::kConfig), 3);
  EXPECT_EQ(exit_code(ErrorCategory::kData), 4);
  EXPECT_EQ(exit_code(ErrorCategory::kBackend), 5);
  EXPECT_EQ(exit_code(ErrorCategory::kTransport), 6);
  EXPECT_EQ(exit_code(ErrorCategory::kInternal), 1);
}

TEST(Cli, UnknownRecipeIsUsageError) {
  const auto dir = fresh("unknown");
  const auto r = invoke({"run", "-c", kConfig.string(), "-r", "nope", "-o", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
  EXPECT_EQ(invoke({"bogus"}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST(Cli, FinetuneWritesMetricsAndManifest) {
  const auto dir = fresh("finetune");
  const auto r = invoke({"run", "-c", kConfig.string(), "-r", "finetune", "-o", dir.string(),
                         "--epochs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "metrics.json"));
  EXPECT_TRUE(fs::exists(dir / "metrics.txt"));
  EXPECT_TRUE(fs::exists(dir / "loss.svg"));
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest.at("status"), "ok");
  EXPECT_EQ(manifest.at("datasets").at("train").at("sha256").get<std::string>().size(), 64u);
  EXPECT_EQ(manifest.at("config_hash").get<std::string>().size(), 16u);

  const auto again = fresh("finetune_again");
  ASSERT_EQ(invoke({"run", "-c", kConfig.string(), "-r", "finetune", "-o", again.string(),
                    "--epochs", "2"}).code, 0);
  EXPECT_EQ(slurp(dir / "metrics.json"), slurp(again / "metrics.json"));
  fs::remove_all(dir);
  fs::remove_all(again);
}

TEST(Cli, FailedRunStillWritesManifest) {
  const auto dir = fresh("failed");
  const auto r = invoke({"train", "-c", kConfig.string(), "-o", dir.string(), "--train",
                         (kToy / "does_not_exist.tsv").string()});
  EXPECT_NE(r.code, 0);
  if (fs::exists(dir / "manifest.json")) {
    const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
    EXPECT_EQ(manifest.at("status"), "failed");
  }
  fs::remove_all(dir);
}

TEST(Cli, StatsStdRatioAfterFullAugmentation) {
  const auto aug = fresh("aug");
  ASSERT_EQ(invoke({"augment", "-i", (kToy / "goemotions_train.tsv").string(), "-o",
                    aug.string()}).code, 0);
  ASSERT_TRUE(fs::exists(aug / "augmented.tsv"));
  ASSERT_TRUE(fs::exists(aug / "augment_manifest.tsv"));
  const auto stats = fresh("stats");
  const auto r = invoke({"stats", "-i", (kToy / "goemotions_train.tsv").string(), "--compare",
                         (aug / "augmented.tsv").string(), "-o", stats.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("std_ratio\t6.000000"), std::string::npos) << r.out;
  EXPECT_TRUE(fs::exists(stats / "histogram.svg"));
  fs::remove_all(aug);
  fs::remove_all(stats);
}

TEST(Cli, EmptyScopeLeavesHistogramUnchanged) {
  const auto aug = fresh("aug_empty");
  ASSERT_EQ(invoke({"augment", "-i", (kToy / "goemotions_train.tsv").string(), "--scope", "",
                    "-o", aug.string()}).code, 0);
  EXPECT_EQ(slurp(aug / "stats_original.tsv"), slurp(aug / "stats_augmented.tsv"));
  auto bars = [](const std::string& svg) {
    std::string out;
    std::istringstream in(svg);
    for (std::string line; std::getline(in, line);) {
      if (line.find("class=\"bar") != std::string::npos) out += line + "\n";
    }
    return out;
  };
  const auto original = bars(slurp(aug / "histogram_original.svg"));
  EXPECT_FALSE(original.empty());
  EXPECT_EQ(original, bars(slurp(aug / "histogram_augmented.svg")));
  fs::remove_all(aug);
}

TEST(Cli, MinorityHighlightMatchesScope) {
  const auto dir = fresh("minority");
  const auto r = invoke({"stats", "-i", (kToy / "goemotions_train.tsv").string(),
                         "--minority-k", "3", "-o", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string svg = slurp(dir / "histogram.svg");
  std::size_t highlighted = 0;
  for (std::size_t p = svg.find("bar highlighted"); p != std::string::npos;
       p = svg.find("bar highlighted", p + 1)) {
    ++highlighted;
  }
  EXPECT_EQ(highlighted, 3u);
  fs::remove_all(dir);
}

TEST(Cli, LlmEvalReplayIsByteDeterministic) {
  const auto work = fresh("llm");
  fs::create_directories(work);
  const LabelSpace space = builtin_space("goemotions");
  const auto corpus = testing::canned_corpus(space, 60, 4, 30, 2, "gpt-4");
  {
    std::ofstream tsv(work / "input.tsv");
    for (const auto& r : corpus.records) {
      std::string sentence = r.sentence;
      tsv << sentence << '\t' << *corpus.gold.at(r.id).begin() << '\t' << r.id << '\n';
    }
  }
  {
    llm::TranscriptLog log(work / "recorded.jsonl");
    for (const auto& b : corpus.batches) {
      llm::TranscriptEntry e;
      e.batch_id = b.batch_id;
      e.request = llm::build_request(b, "gpt-4");
      e.response = corpus.response_for.at(e.request);
      log.append(e);
    }
  }
  auto once = [&](const std::string& name) {
    const auto out = work / name;
    const auto r = invoke({"llm-eval", "--input", (work / "input.tsv").string(), "--replay",
                           (work / "recorded.jsonl").string(), "-o", out.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("hallucination_examples 4"), std::string::npos) << r.out;
    return slurp(out / "error_report.json");
  };
  const auto a = once("a");
  const auto b = once("b");
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  fs::remove_all(work);
}

TEST(Cli, LlmEvalWithoutCredentialIsConfigError) {
  const auto dir = fresh("llm_nokey");
  const auto r = invoke({"llm-eval", "--input", (kToy / "goemotions_test.tsv").string(),
                         "--credential-env", "EMOKIT_TEST_UNSET_KEY_VAR", "-o", dir.string()});
  EXPECT_EQ(r.code, 3);
  fs::remove_all(dir);
}

TEST(Config, ParseErrorsAndDefaults) {
  EXPECT_THROW(ExperimentConfig::parse("{\"bogus\": 1}", "."), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("{ not json", "."), ConfigError);
  EXPECT_THROW(ExperimentConfig::parse("{\"run\": {\"epochs\": \"x\"}}", "."), ConfigError);
  const auto c = ExperimentConfig::parse("// comment\n{\"taxonomy\": \"ekman\"}", "/base");
  EXPECT_EQ(c.taxonomy, "ekman");
  EXPECT_EQ(c.llm.credential_env, "OPENAI_API_KEY");
  EXPECT_EQ(c.llm.batch_limit, 30u);
  const auto loaded = ExperimentConfig::load(kConfig);
  EXPECT_EQ(loaded.hash(), ExperimentConfig::load(kConfig).hash());
  EXPECT_EQ(*loaded.data.train, (kConfig.parent_path() / "toy/goemotions_train.tsv").lexically_normal());
  EXPECT_THROW(parse_recipe("nope"), UsageError);
}

}  // namespace
}  // namespace emokit::cli
