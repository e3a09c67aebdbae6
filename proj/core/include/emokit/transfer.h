#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "emokit/corpus.h"
#include "emokit/trainer.h"

namespace emokit {

enum class HeadPolicy { kReinitialize, kMapWhenSpacesMatch };

std::string_view to_string(HeadPolicy policy);
HeadPolicy parse_head_policy(std::string_view s);

struct StagePlan {
  std::string dataset_id;
  RunConfig config;
};

struct TransferPlan {
  StagePlan stage1;
  StagePlan stage2;
  HeadPolicy head_policy = HeadPolicy::kReinitialize;
};

struct TrainDevPair {
  Dataset train;
  Dataset dev;
};

// Datasets addressable by id from a TransferPlan.
using DatasetCatalog = std::map<std::string, TrainDevPair>;

struct StageReport {
  std::string dataset_id;
  std::vector<CheckpointMeta> metas;
  std::size_t best_epoch = 0;
  std::uint64_t encoder_hash_start = 0;
  std::uint64_t encoder_hash_end = 0;  // best-epoch weights
  bool head_reinitialized = false;

  std::string to_json() const;
};

struct TransferResult {
  Classifier model;
  StageReport stage1;
  StageReport stage2;
};

// Throws ConfigError when a dataset id is missing from the catalog or a stage
// config is invalid.
void validate_plan(const TransferPlan& plan, const DatasetCatalog& catalog);

// Stage-1 fit with its own best-epoch selection, then stage-2 fit starting
// from the stage-1 best encoder. The head is rebuilt for the stage-2 space:
// kReinitialize always starts fresh; kMapWhenSpacesMatch copies rows whose
// label names match and initialises the rest. With `output_dir`, each stage
// report is written as stage<k>.json as soon as that stage finishes.
TransferResult run_transfer(const TransferPlan& plan,
                            const DatasetCatalog& catalog,
                            const EncoderBackend& backend,
                            const std::optional<std::filesystem::path>& output_dir = {});

struct SweepRow {
  SplitSize size;
  std::size_t repeat = 0;
  std::size_t train_size = 0;
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
};

struct SweepSummary {
  SplitSize size;
  std::size_t runs = 0;
  double micro_mean = 0.0;
  double micro_half_width = 0.0;
  double macro_mean = 0.0;
  double macro_half_width = 0.0;
  bool degenerate = false;  // fewer than two runs: zero-width interval
};

struct SweepReport {
  std::vector<SweepRow> rows;  // ordered by size, then repeat
  std::vector<SweepSummary> summary;
};

struct SweepOptions {
  HeadPolicy head_policy = HeadPolicy::kReinitialize;
  std::size_t workers = 1;  // never changes results
};

// Mean and 1.96 * sample std / sqrt(n) half width. n < 2 gives half width 0.
std::pair<double, double> confidence_interval(const std::vector<double>& values);

// For every partition from random_splits(target, sizes, repeats, seed):
// fine-tune a copy of `source` (head per options.head_policy onto the
// target's space, seeded by derive_seed(seed, run index)) on the train part
// and score the test part.
SweepReport run_lowdata_sweep(const Classifier& source, const Dataset& target,
                              const std::vector<SplitSize>& sizes,
                              std::size_t repeats, const RunConfig& config,
                              std::uint64_t seed,
                              const SweepOptions& options = {});

// `size<TAB>repeat<TAB>micro_f1<TAB>macro_f1` rows under a header.
void write_sweep_rows(std::ostream& out, const SweepReport& report);
// Per-size mean and interval, with the interval definition in the header.
void write_sweep_summary(std::ostream& out, const SweepReport& report);

}  // namespace emokit
