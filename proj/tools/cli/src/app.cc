#include "emokit/cli/app.h"

#include <algorithm>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "emokit/augment.h"
#include "emokit/cli/config.h"
#include "emokit/cli/digest.h"
#include "emokit/cli/openai_client.h"
#include "emokit/cli/plots.h"
#include "emokit/corpus.h"
#include "emokit/llmeval.h"
#include "emokit/metrics.h"
#include "emokit/taxonomy.h"
#include "emokit/text.h"
#include "emokit/trainer.h"
#include "emokit/transfer.h"

namespace emokit::cli {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kUsage: return 2;
    case ErrorCategory::kConfig: return 3;
    case ErrorCategory::kData: return 4;
    case ErrorCategory::kBackend: return 5;
    case ErrorCategory::kTransport: return 6;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

namespace {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kBackend: return "backend";
    case ErrorCategory::kTransport: return "transport";
    case ErrorCategory::kInternal: return "internal";
  }
  return "internal";
}

// Values given on the command line; each one overrides the config file.
struct Overrides {
  std::string config;
  std::string output;
  std::string taxonomy;
  std::string train, dev, test;
  std::string encoder;
  std::optional<std::size_t> epochs;
  std::optional<double> learning_rate;
  std::optional<std::size_t> batch_size;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
  std::string problem_kind;

  // augmentation
  std::string method;
  std::optional<std::size_t> variants;
  std::optional<std::string> scope;
  std::optional<std::size_t> minority_k;
  std::optional<std::size_t> workers;
  std::string paraphraser;
  std::string paraphrase_fixture;

  // sweep
  std::string target;
  std::optional<std::size_t> repeats;

  // llm
  std::string input;
  std::string endpoint;
  std::string path;
  std::string model;
  std::string credential_env;
  std::string replay;
  std::optional<std::size_t> limit;
  std::optional<std::size_t> batch_limit;
  std::optional<int> retries;
  std::optional<std::size_t> in_flight;
};

fs::path cwd_path(const std::string& p) { return fs::absolute(p).lexically_normal(); }

ExperimentConfig load_config(const Overrides& o) {
  ExperimentConfig c = o.config.empty()
                           ? ExperimentConfig::parse("{}", fs::current_path())
                           : ExperimentConfig::load(o.config);
  if (!o.output.empty()) c.output_dir = cwd_path(o.output);
  if (!o.taxonomy.empty()) c.taxonomy = o.taxonomy;
  if (!o.train.empty()) c.data.train = cwd_path(o.train);
  if (!o.dev.empty()) c.data.dev = cwd_path(o.dev);
  if (!o.test.empty()) c.data.test = cwd_path(o.test);
  if (!o.encoder.empty()) c.encoder.id = o.encoder;

  std::vector<RunConfig*> runs = {&c.run};
  if (c.transfer) {
    runs.push_back(&c.transfer->stage1.run);
    runs.push_back(&c.transfer->stage2.run);
  }
  if (c.sweep) {
    runs.push_back(&c.sweep->source.run);
    runs.push_back(&c.sweep->run);
  }
  for (RunConfig* r : runs) {
    if (o.epochs) r->epochs = *o.epochs;
    if (o.learning_rate) r->learning_rate = *o.learning_rate;
    if (o.batch_size) r->batch_size = *o.batch_size;
    if (o.seed) r->seed = *o.seed;
    if (o.threshold) r->threshold = *o.threshold;
    if (!o.problem_kind.empty()) r->problem_kind = parse_problem_kind(o.problem_kind);
  }

  auto& a = c.augment;
  if (!o.method.empty()) {
    const auto method = parse_augment_method(o.method);
    if (method != a.policy.method && method == AugmentMethod::kContextual) {
      const auto keep = a.policy;
      a.policy = AugmentationPolicy::contextual_defaults();
      a.policy.variants_per_example = keep.variants_per_example;
      a.policy.seed = keep.seed;
      a.policy.workers = keep.workers;
    }
    a.policy.method = method;
  }
  if (o.variants) a.policy.variants_per_example = *o.variants;
  if (o.scope) {
    std::vector<std::string> labels;
    for (const auto& piece : text::split(*o.scope, ',')) {
      const auto t = text::trim(piece);
      if (!t.empty()) labels.emplace_back(t);
    }
    a.scope = labels;
  }
  if (o.minority_k) a.minority_k = *o.minority_k;
  if (o.seed) a.policy.seed = *o.seed;
  if (o.workers) a.policy.workers = *o.workers;
  if (!o.paraphraser.empty()) a.paraphraser = o.paraphraser;
  if (!o.paraphrase_fixture.empty()) a.paraphrase_fixture = cwd_path(o.paraphrase_fixture);

  if (c.sweep) {
    if (!o.target.empty()) c.sweep->target = cwd_path(o.target);
    if (o.repeats) c.sweep->repeats = *o.repeats;
    if (o.workers) c.sweep->workers = *o.workers;
    if (o.seed) c.sweep->seed = *o.seed;
  }

  if (!o.input.empty()) c.llm.input = cwd_path(o.input);
  if (!o.endpoint.empty()) c.llm.endpoint = o.endpoint;
  if (!o.path.empty()) c.llm.path = o.path;
  if (!o.model.empty()) c.llm.model = o.model;
  if (!o.credential_env.empty()) c.llm.credential_env = o.credential_env;
  if (!o.replay.empty()) c.llm.replay = cwd_path(o.replay);
  if (o.limit) c.llm.limit = *o.limit;
  if (o.batch_limit) c.llm.batch_limit = *o.batch_limit;
  if (o.retries) c.llm.retries = *o.retries;
  if (o.in_flight) c.llm.in_flight = *o.in_flight;
  return c;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << content;
}

template <class Fn>
void write_with(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  fn(out);
}

// Records what a run read and wrote; manifest.json is written on success
// and on failure.
class RunContext {
 public:
  RunContext(std::string command, const ExperimentConfig& config)
      : command_(std::move(command)), config_(config), dir_(config.output_dir) {
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }
  fs::path file(const std::string& name) {
    artifacts_.push_back(name);
    return dir_ / name;
  }
  void dataset(const std::string& role, const fs::path& path) {
    datasets_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
  }
  void seed(const std::string& name, std::uint64_t value) { seeds_[name] = value; }

  void finish(const Error* error) {
    ojson m;
    m["command"] = command_;
    m["status"] = error ? "failed" : "ok";
    if (error) {
      m["error"] = {{"category", std::string(category_name(error->category()))},
                    {"message", error->what()}};
    } else {
      m["error"] = nullptr;
    }
    m["config_hash"] = config_.hash();
    m["run_config_hash"] = config_.run.hash();
    m["seeds"] = seeds_;
    m["datasets"] = datasets_;
    std::sort(artifacts_.begin(), artifacts_.end());
    artifacts_.erase(std::unique(artifacts_.begin(), artifacts_.end()), artifacts_.end());
    m["artifacts"] = artifacts_;
    m["config"] = ojson::parse(config_.to_json());
    write_text(dir_ / "config.json", config_.to_json() + "\n");
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  std::string command_;
  const ExperimentConfig& config_;
  fs::path dir_;
  std::vector<std::string> artifacts_;
  ojson datasets_ = ojson::object();
  ojson seeds_ = ojson::object();
};

template <class Body>
void with_manifest(RunContext& ctx, Body&& body) {
  try {
    body();
  } catch (const Error& e) {
    try {
      ctx.finish(&e);
    } catch (...) {
    }
    throw;
  } catch (const std::exception& e) {
    const Error wrapped(ErrorCategory::kInternal, e.what());
    try {
      ctx.finish(&wrapped);
    } catch (...) {
    }
    throw;
  }
  ctx.finish(nullptr);
}

std::unique_ptr<EncoderBackend> make_backend(const ExperimentConfig& c,
                                             const RunConfig& run) {
  TinyEncoderOptions options = c.encoder.tiny;
  options.max_seq_len = run.max_seq_len;
  return make_encoder(c.encoder.id, options);
}

Dataset load_dataset(RunContext& ctx, const std::string& role, const fs::path& path,
                     const LabelSpace& space, Split split) {
  ctx.dataset(role, path);
  return load_tsv(path, space, split);
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

void plot_loss(const fs::path& path, const std::string& title,
               const std::vector<std::pair<std::string, std::vector<CheckpointMeta>>>& runs) {
  std::vector<Series> series;
  for (const auto& [name, metas] : runs) {
    Series s;
    s.name = name;
    double step = 0;
    for (const auto& m : metas) {
      for (double loss : m.train_loss_curve) {
        s.x.push_back(++step);
        s.y.push_back(loss);
      }
    }
    series.push_back(std::move(s));
  }
  write_line_svg(path, title, "optimizer step", "training loss", series);
}

void write_metrics(RunContext& ctx, const MetricsReport& report, std::ostream& out) {
  write_text(ctx.file("metrics.json"), report_to_json(report) + "\n");
  write_with(ctx.file("metrics.txt"), [&](std::ostream& o) { write_report_text(o, report); });
  out << "macro_f1 " << fixed(report.macro.f1) << "\n";
  out << "micro_f1 " << fixed(report.micro.f1) << "\n";
}

void write_epochs(RunContext& ctx, const std::string& name,
                  const std::vector<CheckpointMeta>& metas, std::size_t best) {
  write_with(ctx.file(name), [&](std::ostream& o) {
    o << "epoch\tmean_train_loss\tmacro_f1\tmicro_f1\tbest\n";
    for (const auto& m : metas) {
      auto get = [&](const char* key) {
        auto it = m.dev_metrics.find(key);
        return it == m.dev_metrics.end() ? 0.0 : it->second;
      };
      o << m.epoch << '\t' << fixed(m.mean_train_loss(), 6) << '\t'
        << fixed(get("macro_f1"), 6) << '\t' << fixed(get("micro_f1"), 6) << '\t'
        << (m.epoch == best ? "*" : "") << '\n';
    }
  });
}

LabelSet labels_by_name(const LabelSpace& space, const std::vector<std::string>& names) {
  LabelSet out;
  for (const auto& n : names) {
    const auto index = space.find(text::to_lower(n));
    if (!index) throw ConfigError("label '" + n + "' is not in " + space.name());
    out.insert(*index);
  }
  return out;
}

std::optional<LabelSet> resolve_scope(const AugmentSettings& a, const Dataset& train) {
  if (a.minority_k) return minority_labels(distribution(train), *a.minority_k);
  if (a.scope) return labels_by_name(train.space(), *a.scope);
  return std::nullopt;
}

// Holds the augmentation backends a policy needs.
struct AugmentToolkit {
  Lexicon lexicon;
  std::unique_ptr<MaskedLMBackend> masked_lm;
  std::unique_ptr<ParaphraseBackend> paraphraser;

  AugmentBackends view() const {
    return {&lexicon, masked_lm.get(), paraphraser.get()};
  }
};

AugmentToolkit make_toolkit(const AugmentSettings& a, const Dataset& train) {
  AugmentToolkit t;
  if (a.synonyms || a.stopwords) {
    const fs::path base = data_dir() / "augment";
    t.lexicon = Lexicon::load(a.synonyms.value_or(base / "synonyms.tsv"),
                              a.stopwords.value_or(base / "stopwords.txt"));
  } else {
    t.lexicon = Lexicon::builtin();
  }
  if (a.policy.method == AugmentMethod::kContextual) {
    if (a.masked_lm != "cooccurrence") {
      throw ConfigError("unknown masked_lm backend '" + a.masked_lm + "'");
    }
    t.masked_lm = std::make_unique<CooccurrenceMaskedLM>(train);
  }
  if (a.policy.method == AugmentMethod::kParaphrase) {
    if (a.paraphraser == "lexicon") {
      t.paraphraser = std::make_unique<LexiconParaphraser>(t.lexicon);
    } else if (a.paraphraser == "echo") {
      t.paraphraser = std::make_unique<EchoParaphraser>();
    } else if (a.paraphraser == "fixture") {
      if (!a.paraphrase_fixture) throw ConfigError("paraphrase_fixture is not set");
      t.paraphraser = std::make_unique<FixtureParaphraser>(
          FixtureParaphraser::load(*a.paraphrase_fixture));
    } else {
      throw ConfigError("unknown paraphraser '" + a.paraphraser + "'");
    }
  }
  return t;
}

void write_stats_file(const fs::path& path, const DistributionStats& stats) {
  write_with(path, [&](std::ostream& o) { write_stats(o, stats); });
}

// Expands `train`, writing the augmented set, its manifest, and before/after
// statistics with histograms.
Dataset augment_step(RunContext& ctx, const ExperimentConfig& c, const Dataset& train,
                     std::ostream& out) {
  AugmentationPolicy policy = c.augment.policy;
  policy.scope_labels = resolve_scope(c.augment, train);
  ctx.seed("augment", policy.seed);
  AugmentToolkit toolkit = make_toolkit(c.augment, train);
  ExpandResult result = [&] {
    try {
      return expand(train, policy, toolkit.view());
    } catch (const ExpansionAborted& e) {
      write_with(ctx.file("augment_manifest.partial.tsv"),
                 [&](std::ostream& o) { write_manifest(o, e.manifest()); });
      throw;
    }
  }();
  write_with(ctx.file("augmented.tsv"), [&](std::ostream& o) { write_tsv(o, result.dataset); });
  write_with(ctx.file("augment_manifest.tsv"),
             [&](std::ostream& o) { write_manifest(o, result.manifest); });

  const LabelSet highlighted = policy.scope_labels.value_or(LabelSet{});
  const auto before = distribution(train);
  const auto after = distribution(result.dataset);
  write_stats_file(ctx.file("stats_original.tsv"), before);
  write_stats_file(ctx.file("stats_augmented.tsv"), after);
  write_histogram_svg(ctx.file("histogram_original.svg"), before, highlighted,
                      "original distribution");
  write_histogram_svg(ctx.file("histogram_augmented.svg"), after, highlighted,
                      "augmented distribution (" +
                          std::string(to_string(policy.method)) + ")");
  out << "records " << train.size() << " -> " << result.dataset.size() << "\n";
  out << "std " << fixed(before.std) << " -> " << fixed(after.std) << "\n";
  return std::move(result.dataset);
}

void recipe_finetune(const ExperimentConfig& c, bool augment, std::ostream& out) {
  c.validate(augment ? Recipe::kAugmentThenFinetune : Recipe::kFinetune);
  RunContext ctx(std::string(to_string(augment ? Recipe::kAugmentThenFinetune
                                               : Recipe::kFinetune)),
                 c);
  with_manifest(ctx, [&] {
    const LabelSpace space = builtin_space(c.taxonomy);
    Dataset train = load_dataset(ctx, "train", *c.data.train, space, Split::kTrain);
    const Dataset dev = load_dataset(ctx, "dev", *c.data.dev, space, Split::kDev);
    std::optional<Dataset> test;
    if (c.data.test) test = load_dataset(ctx, "test", *c.data.test, space, Split::kTest);
    if (augment) train = augment_step(ctx, c, train, out);

    ctx.seed("run", c.run.seed);
    ctx.seed("encoder", c.encoder.tiny.seed);
    ctx.seed("head", derive_seed(c.run.seed, "head"));
    const auto backend = make_backend(c, c.run);
    FitOptions options;
    options.checkpoint_root = ctx.dir() / "checkpoints";
    FitResult fitted = fit(train, dev, c.run, *backend, options);

    write_with(ctx.file("loss.tsv"),
               [&](std::ostream& o) { write_loss_curve(o, fitted.metas); });
    write_epochs(ctx, "epochs.tsv", fitted.metas, fitted.best_epoch);
    plot_loss(ctx.file("loss.svg"), "training loss", {{"train", fitted.metas}});
    out << "best epoch " << fitted.best_epoch << "\n";
    write_metrics(ctx, evaluate(fitted.model, test ? *test : dev, c.run), out);
  });
}

void recipe_transfer(const ExperimentConfig& c, std::ostream& out) {
  c.validate(Recipe::kTransfer);
  RunContext ctx(std::string(to_string(Recipe::kTransfer)), c);
  with_manifest(ctx, [&] {
    const auto& t = *c.transfer;
    if (t.stage1.dataset_id == t.stage2.dataset_id) {
      throw ConfigError("transfer stages need distinct dataset ids");
    }
    DatasetCatalog catalog;
    std::optional<Dataset> test;
    for (const StageSettings* s : {&t.stage1, &t.stage2}) {
      const LabelSpace space = builtin_space(s->taxonomy);
      catalog.emplace(s->dataset_id,
                      TrainDevPair{load_dataset(ctx, s->dataset_id + ".train",
                                                *s->data.train, space, Split::kTrain),
                                   load_dataset(ctx, s->dataset_id + ".dev", *s->data.dev,
                                                space, Split::kDev)});
      if (s == &t.stage2 && s->data.test) {
        test = load_dataset(ctx, s->dataset_id + ".test", *s->data.test, space,
                            Split::kTest);
      }
    }
    TransferPlan plan{{t.stage1.dataset_id, t.stage1.run},
                      {t.stage2.dataset_id, t.stage2.run},
                      t.head_policy};
    ctx.seed("stage1", t.stage1.run.seed);
    ctx.seed("stage2", t.stage2.run.seed);
    ctx.seed("encoder", c.encoder.tiny.seed);
    const auto backend = make_backend(c, t.stage1.run);
    TransferResult result = run_transfer(plan, catalog, *backend, ctx.dir());
    ctx.file("stage1.json");
    ctx.file("stage2.json");
    write_epochs(ctx, "stage1_epochs.tsv", result.stage1.metas, result.stage1.best_epoch);
    write_epochs(ctx, "stage2_epochs.tsv", result.stage2.metas, result.stage2.best_epoch);
    plot_loss(ctx.file("loss.svg"), "training loss by stage",
              {{"stage 1: " + t.stage1.dataset_id, result.stage1.metas},
               {"stage 2: " + t.stage2.dataset_id, result.stage2.metas}});
    out << "stage1 end hash " << std::hex << result.stage1.encoder_hash_end
        << ", stage2 start hash " << result.stage2.encoder_hash_start << std::dec << "\n";
    const Dataset& eval = test ? *test : catalog.at(t.stage2.dataset_id).dev;
    write_metrics(ctx, evaluate(result.model, eval, t.stage2.run), out);
  });
}

void recipe_sweep(const ExperimentConfig& c, std::ostream& out) {
  c.validate(Recipe::kLowdataSweep);
  RunContext ctx(std::string(to_string(Recipe::kLowdataSweep)), c);
  with_manifest(ctx, [&] {
    const auto& s = *c.sweep;
    const LabelSpace source_space = builtin_space(s.source.taxonomy);
    const Dataset train = load_dataset(ctx, "source.train", *s.source.data.train,
                                       source_space, Split::kTrain);
    const Dataset dev =
        load_dataset(ctx, "source.dev", *s.source.data.dev, source_space, Split::kDev);
    const Dataset target = load_dataset(ctx, "target", *s.target,
                                        builtin_space(s.target_taxonomy), Split::kTrain);
    ctx.seed("source", s.source.run.seed);
    ctx.seed("sweep", s.seed);
    ctx.seed("encoder", c.encoder.tiny.seed);
    const auto backend = make_backend(c, s.source.run);
    FitOptions options;
    options.checkpoint_root = ctx.dir() / "source";
    FitResult source = fit(train, dev, s.source.run, *backend, options);
    write_epochs(ctx, "source_epochs.tsv", source.metas, source.best_epoch);

    SweepOptions sweep_options;
    sweep_options.head_policy = s.head_policy;
    sweep_options.workers = s.workers;
    const SweepReport report = run_lowdata_sweep(source.model, target, s.sizes, s.repeats,
                                                 s.run, s.seed, sweep_options);
    write_with(ctx.file("sweep_rows.tsv"),
               [&](std::ostream& o) { write_sweep_rows(o, report); });
    write_with(ctx.file("sweep_summary.tsv"),
               [&](std::ostream& o) { write_sweep_summary(o, report); });

    Series micro{"micro-F1", {}, {}, {}};
    Series macro{"macro-F1", {}, {}, {}};
    std::vector<std::string> ticks;
    for (std::size_t i = 0; i < report.summary.size(); ++i) {
      const auto& row = report.summary[i];
      ticks.push_back(row.size.to_string());
      micro.x.push_back(double(i));
      micro.y.push_back(row.micro_mean);
      micro.error.push_back(row.micro_half_width);
      macro.x.push_back(double(i));
      macro.y.push_back(row.macro_mean);
      macro.error.push_back(row.macro_half_width);
      out << "size " << row.size.to_string() << ": micro " << fixed(row.micro_mean)
          << " +/- " << fixed(row.micro_half_width) << ", macro " << fixed(row.macro_mean)
          << " +/- " << fixed(row.macro_half_width) << "\n";
    }
    write_line_svg(ctx.file("sweep.svg"), "low-data transfer", "training size", "F1",
                   {micro, macro}, ticks);
    out << "rows " << report.rows.size() << "\n";
  });
}

void recipe_llm_eval(const ExperimentConfig& c, std::ostream& out) {
  c.validate(Recipe::kLlmEval);
  RunContext ctx(std::string(to_string(Recipe::kLlmEval)), c);
  with_manifest(ctx, [&] {
    const LabelSpace space = builtin_space(c.taxonomy);
    const Dataset input = load_dataset(ctx, "input", *c.llm.input, space, Split::kTest);
    const std::size_t n =
        c.llm.limit == 0 ? input.size() : std::min(c.llm.limit, input.size());

    std::vector<llm::PromptRecord> prompts;
    std::map<std::string, LabelSet> gold;
    for (std::size_t i = 0; i < n; ++i) {
      prompts.push_back({input[i].id, input[i].text});
      gold[input[i].id] = input[i].label_ids;
    }
    const auto batches = llm::build_batches(prompts, c.llm.batch_limit);

    std::unique_ptr<llm::ChatClient> client;
    if (c.llm.replay) {
      ctx.dataset("replay", *c.llm.replay);
      client = std::make_unique<llm::ReplayClient>(llm::TranscriptLog::read(*c.llm.replay));
    } else {
      client = std::make_unique<OpenAIChatClient>(c.llm.endpoint, c.llm.path,
                                                  c.llm.credential_env, c.llm.timeout_s);
    }
    const fs::path transcript = ctx.file("transcript.jsonl");
    fs::remove(transcript);
    llm::TranscriptLog log(transcript);
    llm::RetryPolicy retry;
    retry.retries = c.llm.retries;
    retry.base_delay = std::chrono::milliseconds(c.llm.base_delay_ms);
    const auto responses =
        llm::call_batches(batches, *client, c.llm.model, retry, log, c.llm.in_flight);

    std::vector<llm::LLMResponseRecord> records;
    ojson parse_reports = ojson::array();
    std::size_t missing = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      std::set<std::string> expected;
      for (const auto& r : batches[b].records) expected.insert(r.id);
      auto parsed = llm::parse_response(responses[b], expected, space);
      const auto& rep = parsed.report;
      missing += rep.missing_ids.size();
      parse_reports.push_back({{"batch_id", batches[b].batch_id},
                               {"records", parsed.records.size()},
                               {"missing_ids", rep.missing_ids},
                               {"duplicate_ids", rep.duplicate_ids},
                               {"unexpected_ids", rep.unexpected_ids},
                               {"malformed_lines", rep.malformed_lines},
                               {"extra_column_rows", rep.extra_column_rows}});
      for (auto& r : parsed.records) records.push_back(std::move(r));
    }
    write_text(ctx.file("parse_report.json"), parse_reports.dump(2) + "\n");
    write_with(ctx.file("predictions.tsv"), [&](std::ostream& o) {
      o << "id\tvalid\thallucinated\traw_labels\n";
      for (const auto& r : records) {
        std::vector<std::string> valid;
        for (auto i : r.valid) valid.push_back(space.label(i));
        const std::vector<std::string> bad(r.hallucinated.begin(), r.hallucinated.end());
        o << r.id << '\t' << text::join(valid, ",") << '\t' << text::join(bad, ",") << '\t'
          << r.raw_labels << '\n';
      }
    });

    const auto report = llm::analyze(records, gold, space);
    write_text(ctx.file("error_report.json"), report.to_json() + "\n");
    write_with(ctx.file("metrics.txt"),
               [&](std::ostream& o) { write_report_text(o, report.metrics); });
    out << "batches " << batches.size() << ", parsed " << records.size() << ", missing "
        << missing << "\n";
    out << "hallucination_examples " << report.hallucination_examples << "\n";
    out << "over_labelled " << report.over_labelled << "\n";
    out << "over_interpretation " << report.over_interpretation << "\n";
    out << "macro_f1 " << fixed(report.metrics.macro.f1) << "\n";
  });
}

void run_recipe(Recipe recipe, const ExperimentConfig& c, std::ostream& out) {
  switch (recipe) {
    case Recipe::kFinetune: return recipe_finetune(c, false, out);
    case Recipe::kAugmentThenFinetune: return recipe_finetune(c, true, out);
    case Recipe::kTransfer: return recipe_transfer(c, out);
    case Recipe::kLowdataSweep: return recipe_sweep(c, out);
    case Recipe::kLlmEval: return recipe_llm_eval(c, out);
  }
}

struct StatsOptions {
  std::string input;
  std::string compare;
  std::string highlight;
  std::optional<std::size_t> minority_k;
  bool include_neutral = false;
};

void cmd_stats(const ExperimentConfig& c, const StatsOptions& s, std::ostream& out) {
  RunContext ctx("stats", c);
  with_manifest(ctx, [&] {
    const LabelSpace space = builtin_space(c.taxonomy);
    const fs::path input = s.input.empty() ? c.data.train.value_or("") : cwd_path(s.input);
    if (input.empty()) throw UsageError("stats needs --input or data.train");
    const Dataset ds = load_dataset(ctx, "input", input, space, Split::kTrain);
    const auto stats = distribution(ds, s.include_neutral);

    LabelSet highlighted;
    if (s.minority_k) highlighted = minority_labels(stats, *s.minority_k);
    if (!s.highlight.empty()) {
      std::vector<std::string> names;
      for (const auto& piece : text::split(s.highlight, ',')) {
        if (!text::trim(piece).empty()) names.emplace_back(text::trim(piece));
      }
      const auto extra = labels_by_name(space, names);
      highlighted.insert(extra.begin(), extra.end());
    }
    write_stats_file(ctx.file("stats.tsv"), stats);
    write_histogram_svg(ctx.file("histogram.svg"), stats, highlighted,
                        "label distribution: " + input.filename().string());
    write_stats(out, stats);
    if (!highlighted.empty()) {
      std::vector<std::string> names;
      for (auto i : highlighted) names.push_back(space.label(i));
      out << "highlighted\t" << text::join(names, ",") << "\n";
    }
    if (!s.compare.empty()) {
      const Dataset other =
          load_dataset(ctx, "compare", cwd_path(s.compare), space, Split::kTrain);
      const auto other_stats = distribution(other, s.include_neutral);
      write_stats_file(ctx.file("stats_compare.tsv"), other_stats);
      write_histogram_svg(ctx.file("histogram_compare.svg"), other_stats, highlighted,
                          "label distribution: " + fs::path(s.compare).filename().string());
      const double ratio = stats.std == 0 ? 0.0 : other_stats.std / stats.std;
      out << "std_ratio\t" << fixed(ratio, 6) << "\n";
    }
  });
}

void cmd_augment(const ExperimentConfig& c, const std::string& input_flag, std::ostream& out) {
  RunContext ctx("augment", c);
  with_manifest(ctx, [&] {
    c.augment.policy.validate();
    const LabelSpace space = builtin_space(c.taxonomy);
    const fs::path input =
        input_flag.empty() ? c.data.train.value_or("") : cwd_path(input_flag);
    if (input.empty()) throw UsageError("augment needs --input or data.train");
    const Dataset ds = load_dataset(ctx, "input", input, space, Split::kTrain);
    augment_step(ctx, c, ds, out);
  });
}

void cmd_compare(const ExperimentConfig& c, const std::vector<std::string>& specs,
                 const std::string& field, std::ostream& out) {
  if (specs.size() < 2) throw UsageError("compare needs at least two --report NAME=PATH");
  RunContext ctx("compare", c);
  with_manifest(ctx, [&] {
    std::vector<std::pair<std::string, MetricsReport>> reports;
    for (const auto& spec : specs) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos || eq == 0) {
        throw UsageError("--report expects NAME=PATH, got '" + spec + "'");
      }
      const fs::path path = cwd_path(spec.substr(eq + 1));
      ctx.dataset(spec.substr(0, eq), path);
      std::ifstream in(path);
      if (!in) throw ConfigError("cannot open report " + path.string());
      std::stringstream buffer;
      buffer << in.rdbuf();
      reports.emplace_back(spec.substr(0, eq), report_from_json(buffer.str()));
    }
    const auto table = compare(reports, parse_metric_field(field));
    write_with(ctx.file("comparison.txt"),
               [&](std::ostream& o) { write_comparison(o, table); });
    write_comparison(out, table);
  });
}

void add_common(CLI::App* sub, Overrides& o) {
  sub->add_option("-c,--config", o.config, "experiment config (JSON with comments)")
      ->check(CLI::ExistingFile);
  sub->add_option("-o,--output", o.output, "output directory");
  sub->add_option("--taxonomy", o.taxonomy, "label space name");
  sub->add_option("--seed", o.seed, "seed for training, augmentation and splits");
}

void add_training(CLI::App* sub, Overrides& o) {
  sub->add_option("--train", o.train, "training TSV");
  sub->add_option("--dev", o.dev, "development TSV");
  sub->add_option("--test", o.test, "held-out TSV used for the final report");
  sub->add_option("--encoder", o.encoder, "encoder backend id");
  sub->add_option("--epochs", o.epochs);
  sub->add_option("--lr", o.learning_rate, "learning rate");
  sub->add_option("--batch-size", o.batch_size);
  sub->add_option("--threshold", o.threshold, "multi-label decision threshold");
  sub->add_option("--problem-kind", o.problem_kind, "multi_label or single_label");
}

void add_augment(CLI::App* sub, Overrides& o) {
  sub->add_option("--method", o.method, "dda, contextual or paraphrase");
  sub->add_option("--variants", o.variants, "variants per original");
  sub->add_option("--scope", o.scope,
                  "comma-separated labels to augment (empty string for none)");
  sub->add_option("--minority-k", o.minority_k, "augment the k rarest labels");
  sub->add_option("--workers", o.workers);
  sub->add_option("--paraphraser", o.paraphraser, "lexicon, echo or fixture");
  sub->add_option("--paraphrase-fixture", o.paraphrase_fixture);
}

void add_sweep(CLI::App* sub, Overrides& o) {
  sub->add_option("--target", o.target, "target dataset TSV");
  sub->add_option("--repeats", o.repeats);
}

void add_llm(CLI::App* sub, Overrides& o) {
  sub->add_option("--input", o.input, "TSV with sentences and gold labels");
  sub->add_option("--endpoint", o.endpoint, "base URL, e.g. https://api.openai.com");
  sub->add_option("--path", o.path, "request path");
  sub->add_option("--model", o.model, "model id");
  sub->add_option("--credential-env", o.credential_env,
                  "environment variable holding the API key");
  sub->add_option("--replay", o.replay, "serve responses from a transcript");
  sub->add_option("--limit", o.limit, "number of records to send (0 = all)");
  sub->add_option("--batch-limit", o.batch_limit, "sentences per request");
  sub->add_option("--retries", o.retries, "retry budget per batch");
  sub->add_option("--in-flight", o.in_flight, "concurrent requests");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Emotion classification experiments: augmentation, fine-tuning, "
               "transfer and LLM evaluation",
               "emokit"};
  app.require_subcommand(1);
  Overrides o;
  StatsOptions stats;
  std::string recipe_name;
  std::vector<std::string> report_specs;
  std::string field = "f1";
  std::function<void()> action;

  auto* stats_cmd = app.add_subcommand("stats", "label distribution, std and histogram");
  add_common(stats_cmd, o);
  stats_cmd->add_option("-i,--input", stats.input, "dataset TSV");
  stats_cmd->add_option("--compare", stats.compare, "second TSV; prints the std ratio");
  stats_cmd->add_option("--minority-k", stats.minority_k, "highlight the k rarest labels");
  stats_cmd->add_option("--highlight", stats.highlight, "comma-separated labels");
  stats_cmd->add_flag("--include-neutral", stats.include_neutral);
  stats_cmd->callback([&] { action = [&] { cmd_stats(load_config(o), stats, out); }; });

  auto* augment_cmd = app.add_subcommand("augment", "expand a dataset");
  add_common(augment_cmd, o);
  std::string augment_input;
  augment_cmd->add_option("-i,--input", augment_input, "dataset TSV");
  add_augment(augment_cmd, o);
  augment_cmd->callback(
      [&] { action = [&] { cmd_augment(load_config(o), augment_input, out); }; });

  auto* train_cmd = app.add_subcommand("train", "fine-tune and evaluate (finetune recipe)");
  add_common(train_cmd, o);
  add_training(train_cmd, o);
  train_cmd->callback([&] { action = [&] { recipe_finetune(load_config(o), false, out); }; });

  auto* transfer_cmd = app.add_subcommand("transfer", "two-stage fine-tuning");
  add_common(transfer_cmd, o);
  add_training(transfer_cmd, o);
  transfer_cmd->callback([&] { action = [&] { recipe_transfer(load_config(o), out); }; });

  auto* sweep_cmd = app.add_subcommand("sweep", "low-data transfer sweep");
  add_common(sweep_cmd, o);
  add_training(sweep_cmd, o);
  add_sweep(sweep_cmd, o);
  sweep_cmd->add_option("--workers", o.workers);
  sweep_cmd->callback([&] { action = [&] { recipe_sweep(load_config(o), out); }; });

  auto* llm_cmd = app.add_subcommand("llm-eval", "zero-shot chat model evaluation");
  add_common(llm_cmd, o);
  add_llm(llm_cmd, o);
  llm_cmd->callback([&] { action = [&] { recipe_llm_eval(load_config(o), out); }; });

  auto* compare_cmd = app.add_subcommand("compare", "side-by-side metric table");
  add_common(compare_cmd, o);
  compare_cmd->add_option("--report", report_specs, "NAME=metrics.json (repeatable)")
      ->required();
  compare_cmd->add_option("--field", field, "precision, recall or f1");
  compare_cmd->callback([&] {
    action = [&] { cmd_compare(load_config(o), report_specs, field, out); };
  });

  auto* run_cmd = app.add_subcommand("run", "run a named recipe from a config");
  add_common(run_cmd, o);
  add_training(run_cmd, o);
  add_augment(run_cmd, o);
  add_sweep(run_cmd, o);
  add_llm(run_cmd, o);
  run_cmd->add_option("-r,--recipe", recipe_name,
                      "finetune | augment_then_finetune | transfer | lowdata_sweep | "
                      "llm_eval")
      ->required();
  run_cmd->callback([&] {
    action = [&] { run_recipe(parse_recipe(recipe_name), load_config(o), out); };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorCategory::kUsage);
  }
  try {
    if (action) action();
    return 0;
  } catch (const Error& e) {
    err << "emokit: " << category_name(e.category()) << " error: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::exception& e) {
    err << "emokit: internal error: " << e.what() << "\n";
    return exit_code(ErrorCategory::kInternal);
  }
}

}  // namespace emokit::cli
