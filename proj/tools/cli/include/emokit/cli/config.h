#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "emokit/augment.h"
#include "emokit/corpus.h"
#include "emokit/encoder.h"
#include "emokit/trainer.h"
#include "emokit/transfer.h"

namespace emokit::cli {

enum class Recipe { kFinetune, kAugmentThenFinetune, kTransfer, kLowdataSweep, kLlmEval };

std::string_view to_string(Recipe recipe);
Recipe parse_recipe(std::string_view s);
std::vector<std::string> recipe_names();

struct DataPaths {
  std::optional<std::filesystem::path> train;
  std::optional<std::filesystem::path> dev;
  std::optional<std::filesystem::path> test;
};

struct EncoderSettings {
  std::string id = "tiny";
  TinyEncoderOptions tiny;
};

struct AugmentSettings {
  AugmentationPolicy policy;
  // Label names to augment; unset means every record, an empty list means
  // none. minority_k, when set, replaces it with the k rarest training labels.
  std::optional<std::vector<std::string>> scope;
  std::optional<std::size_t> minority_k;
  std::string masked_lm = "cooccurrence";
  std::string paraphraser = "lexicon";  // lexicon | echo | fixture
  std::optional<std::filesystem::path> paraphrase_fixture;
  std::optional<std::filesystem::path> synonyms;
  std::optional<std::filesystem::path> stopwords;
};

struct StageSettings {
  std::string dataset_id;
  std::string taxonomy = "goemotions";
  DataPaths data;
  RunConfig run;
};

struct TransferSettings {
  StageSettings stage1;
  StageSettings stage2;
  HeadPolicy head_policy = HeadPolicy::kReinitialize;
};

struct SweepSettings {
  StageSettings source;
  std::string target_taxonomy = "isear";
  std::optional<std::filesystem::path> target;
  std::vector<SplitSize> sizes = {SplitSize::count(100), SplitSize::count(200),
                                  SplitSize::count(500), SplitSize::count(1000),
                                  SplitSize::fraction(0.8)};
  std::size_t repeats = 10;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  RunConfig run;
  HeadPolicy head_policy = HeadPolicy::kReinitialize;
};

struct LlmSettings {
  std::string endpoint = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4";
  std::string credential_env = "OPENAI_API_KEY";
  std::optional<std::filesystem::path> input;
  std::size_t limit = 1000;  // 0 keeps every record
  std::size_t batch_limit = 30;
  int retries = 3;
  std::int64_t base_delay_ms = 500;
  std::size_t in_flight = 2;
  int timeout_s = 120;
  std::optional<std::filesystem::path> replay;
};

struct ExperimentConfig {
  std::string taxonomy = "goemotions";
  DataPaths data;
  std::filesystem::path output_dir = "runs/latest";
  EncoderSettings encoder;
  RunConfig run;
  AugmentSettings augment;
  std::optional<TransferSettings> transfer;
  std::optional<SweepSettings> sweep;
  LlmSettings llm;

  // JSON with // and /* */ comments. Relative paths resolve against
  // base_dir. Unknown keys are rejected with ConfigError.
  static ExperimentConfig parse(const std::string& text,
                                const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);

  // Canonical JSON; hashing it identifies the run.
  std::string to_json() const;
  std::string hash() const;

  // Checks the settings the recipe needs: referenced files exist and the
  // output directory can be created.
  void validate(Recipe recipe) const;
};

}  // namespace emokit::cli
