#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emokit/corpus.h"
#include "emokit/encoder.h"
#include "emokit/metrics.h"
#include "emokit/rng.h"
#include "emokit/tensor.h"

namespace emokit {

enum class ProblemKind { kMultiLabel, kSingleLabel };
enum class Scheduler { kNone, kLinearWarmup };
enum class SelectionMetric { kMacroF1, kMicroF1 };

std::string_view to_string(ProblemKind kind);
std::string_view to_string(Scheduler scheduler);
std::string_view to_string(SelectionMetric metric);
ProblemKind parse_problem_kind(std::string_view s);
Scheduler parse_scheduler(std::string_view s);
SelectionMetric parse_selection_metric(std::string_view s);

struct RunConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  double weight_decay = 0.0;
  std::size_t warmup_steps = 0;
  std::uint64_t seed = 0;
  Scheduler scheduler = Scheduler::kNone;
  ProblemKind problem_kind = ProblemKind::kMultiLabel;
  double threshold = 0.3;
  SelectionMetric selection_metric = SelectionMetric::kMacroF1;
  std::size_t max_seq_len = 64;

  // AdamW moments.
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  // Throws ConfigError.
  void validate() const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& json);

  // 16 hex digits of FNV-1a over to_json().
  std::string hash() const;
};

struct CheckpointMeta {
  std::size_t epoch = 0;  // 1-based
  std::map<std::string, double> dev_metrics;
  std::vector<double> train_loss_curve;  // per optimizer step in this epoch
  std::string config_hash;

  double mean_train_loss() const;
  std::string to_json() const;
  static CheckpointMeta from_json(const std::string& json);
};

// Linear classification head over pooled encoder output.
struct ClassifierHead {
  Matrix weights;        // labels x width
  std::vector<double> bias;
  Matrix weight_grads;
  std::vector<double> bias_grads;

  ClassifierHead() = default;
  ClassifierHead(std::size_t labels, std::size_t width);

  // Small Gaussian weights, zero bias.
  void reinitialize(Rng& rng, double scale = 0.02);
  Matrix logits(const Matrix& pooled) const;
  void zero_grad();
};

// Trained (or trainable) model handle: encoder + head over a label space.
// Copying deep-copies the encoder. fit() mutates; predict() is const and may
// run concurrently.
class Classifier {
 public:
  Classifier(std::unique_ptr<EncoderBackend> encoder, LabelSpace space,
             ProblemKind kind, std::uint64_t head_seed = 0);

  Classifier(const Classifier& other);
  Classifier& operator=(const Classifier& other);
  Classifier(Classifier&&) noexcept = default;
  Classifier& operator=(Classifier&&) noexcept = default;

  const LabelSpace& space() const noexcept { return space_; }
  ProblemKind problem_kind() const noexcept { return kind_; }
  EncoderBackend& encoder() noexcept { return *encoder_; }
  const EncoderBackend& encoder() const noexcept { return *encoder_; }
  ClassifierHead& head() noexcept { return head_; }
  const ClassifierHead& head() const noexcept { return head_; }

  // Replaces the head with a fresh one for `space`.
  void reset_head(LabelSpace space, ProblemKind kind, std::uint64_t seed);

  // New head for `space`; rows whose label name exists in the current space
  // are copied, the rest freshly initialised.
  void remap_head(LabelSpace space, ProblemKind kind, std::uint64_t seed);

  Matrix logits(std::span<const std::string> texts) const;

  // Mean loss over the batch; when `accumulate` is set, gradients of that
  // loss are added to head and encoder gradient buffers.
  //   multi_label:  mean over examples and labels of sigmoid BCE.
  //   single_label: mean over examples of softmax cross-entropy against the
  //                 gold distribution (uniform over the gold labels).
  double batch_loss(std::span<const std::string> texts,
                    std::span<const LabelSet> gold, bool accumulate);

  void zero_grad();
  std::vector<ParamRef> parameters();

  void save(const std::filesystem::path& dir) const;
  void load(const std::filesystem::path& dir);

 private:
  std::unique_ptr<EncoderBackend> encoder_;
  LabelSpace space_;
  ProblemKind kind_;
  ClassifierHead head_;
};

// Decoupled weight decay Adam.
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay)
      : beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
        weight_decay_(weight_decay) {}

  void step(std::vector<ParamRef> params, double learning_rate);
  std::size_t steps() const noexcept { return step_; }

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  std::size_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

// Learning rate for a 0-based optimizer step. linear_warmup ramps linearly
// over warmup_steps, then decays linearly to 0 at total_steps.
double scheduled_lr(const RunConfig& config, std::size_t step,
                    std::size_t total_steps);

struct FitOptions {
  // When set, checkpoints go to <root>/<config_hash>/epoch_<k>/.
  std::optional<std::filesystem::path> checkpoint_root;
  bool keep_all_checkpoints = false;
};

struct FitResult {
  Classifier model;  // weights of the selected best epoch
  std::vector<CheckpointMeta> metas;
  std::size_t best_epoch = 0;  // 1-based
};

// Trains `model` in place on `train`, evaluating on `dev` after every epoch.
// Throws ConfigError on an empty train set, SpaceMismatch when train, dev and
// model disagree on the label space.
FitResult fit(Classifier model, const Dataset& train, const Dataset& dev,
              const RunConfig& config, const FitOptions& options = {});

// Convenience: fresh head on `backend` for train's space.
FitResult fit(const Dataset& train, const Dataset& dev, const RunConfig& config,
              const EncoderBackend& backend, const FitOptions& options = {});

// 1-based epoch with the highest metric; ties go to the earliest.
std::size_t select_best(const std::vector<CheckpointMeta>& metas,
                        SelectionMetric metric);

// Sigmoid scores for multi_label, softmax for single_label.
std::vector<std::vector<double>> predict(const Classifier& model,
                                         const std::vector<std::string>& texts,
                                         const RunConfig& config);

// multi_label: labels scoring >= threshold, else the argmax singleton;
// single_label: argmax singleton. Argmax ties go to the lowest index.
LabelSet decide(std::span<const double> scores, const RunConfig& config);

// Predictions for a whole dataset scored against its gold labels.
MetricsReport evaluate(const Classifier& model, const Dataset& dataset,
                       const RunConfig& config);

// `step<TAB>loss` with a header; steps are numbered globally from first_step.
void write_loss_curve(std::ostream& out, const std::vector<CheckpointMeta>& metas,
                      std::size_t first_step = 1);

}  // namespace emokit
