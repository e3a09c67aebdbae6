#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "emokit/augment.h"
#include "emokit/corpus.h"
#include "emokit/llmeval.h"
#include "emokit/metrics.h"
#include "emokit/taxonomy.h"
#include "emokit/text.h"
#include "emokit/trainer.h"
#include "emokit/transfer.h"
#include "fixtures.h"
#include "llm_fixture.h"
#include "metrics_oracle.h"
#include "toy_data.h"

namespace fs = std::filesystem;
using namespace emokit;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status;
  std::string detail;
};

Outcome pass(std::string d) { return {Status::kPass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::kFail, std::move(d)}; }

std::string num(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

std::vector<std::string> sorted_tokens(const std::string& s) {
  auto t = text::tokenize(s);
  std::sort(t.begin(), t.end());
  return t;
}

Outcome std_scaling() {
  const Lexicon lex = Lexicon::builtin();
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto ds = testing::random_dataset(builtin_space("goemotions"), 2000, seed);
    AugmentationPolicy p;
    p.seed = seed;
    p.workers = 4;
    const auto out = expand(ds, p, {&lex, nullptr, nullptr});
    const double before = distribution(ds).std;
    const double after = distribution(out.dataset).std;
    worst = std::max(worst, std::abs(after - 6.0 * before) / (6.0 * before));
  }
  if (worst > 1e-9) return fail("synthetic relative error " + sci(worst));
  const double published = 14102.14 / 2350.36;
  if (num(published, 2) != "6.00") return fail("published ratio " + num(published, 4));
  std::string detail = "synthetic worst rel err " + sci(worst) +
                       "; published ratio " + num(published, 2);
  if (const char* path = std::getenv("EMOKIT_GOEMOTIONS_TRAIN")) {
    const auto real = load_tsv(path, builtin_space("goemotions"), Split::kTrain);
    AugmentationPolicy p;
    p.workers = 8;
    const auto out = expand(real, p, {&lex, nullptr, nullptr});
    const double ratio = distribution(out.dataset).std / distribution(real).std;
    if (num(ratio, 2) != num(published, 2)) return fail("real-data ratio " + num(ratio, 4));
    detail += "; real-data ratio " + num(ratio, 2);
  } else {
    detail += "; real-data check skipped (EMOKIT_GOEMOTIONS_TRAIN unset)";
  }
  return pass(detail);
}

Outcome augmentation_invariants() {
  const Lexicon lex = Lexicon::builtin();
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 1000, 99);
  const CooccurrenceMaskedLM lm(ds);
  const LexiconParaphraser para(lex);
  for (AugmentMethod method :
       {AugmentMethod::kDda, AugmentMethod::kContextual, AugmentMethod::kParaphrase}) {
    AugmentationPolicy p = method == AugmentMethod::kContextual
                               ? AugmentationPolicy::contextual_defaults()
                               : AugmentationPolicy{};
    p.method = method;
    p.workers = 4;
    const auto out = expand(ds, p, {&lex, &lm, &para});
    if (out.dataset.size() != ds.size() * 6) return fail("count law broken for " + std::string(to_string(method)));
    for (std::size_t i = 0; i < out.dataset.size(); ++i) {
      const auto& r = out.dataset[i];
      if (!r.provenance.augmented) continue;
      const auto& parent = out.dataset[i - i % 6];
      if (parent.id != r.provenance.parent_id || parent.label_ids != r.label_ids) {
        return fail("label set not preserved for " + r.id);
      }
    }
  }
  for (const auto& r : ds.records()) {
    for (std::uint64_t k = 0; k < 5; ++k) {
      Rng rng(derive_seed(derive_seed(7, r.id), k));
      const auto del = dda_apply(r.text, DdaOp::kRandomDelete, 0.5, lex, rng);
      if (text::tokenize(del.text).empty()) return fail("delete emptied " + r.id);
      const auto swp = dda_apply(r.text, DdaOp::kRandomSwap, 0.5, lex, rng);
      if (sorted_tokens(swp.text) != sorted_tokens(r.text)) return fail("swap not a permutation");
    }
  }
  return pass("1000 records x 3 methods: 6000 rows each, labels preserved");
}

Outcome metrics_oracle() {
  const LabelSpace space = builtin_space("goemotions");
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<LabelSet> gold, pred;
    testing::random_pairs(seed, 1 + seed * 3, 28, gold, pred);
    const auto m = score(gold, pred, space);
    const auto o = testing::brute_force(gold, pred, 28);
    bool same = m.macro.precision == o.macro_p && m.macro.recall == o.macro_r &&
                m.macro.f1 == o.macro_f && m.micro.precision == o.micro_p &&
                m.micro.recall == o.micro_r && m.micro.f1 == o.micro_f &&
                m.std.precision == o.std_p && m.std.recall == o.std_r && m.std.f1 == o.std_f &&
                m.subset_accuracy == o.subset;
    for (std::size_t c = 0; c < 28; ++c) {
      same = same && m.per_class[c].precision == o.p[c] && m.per_class[c].recall == o.r[c] &&
             m.per_class[c].f1 == o.f[c];
    }
    if (!same) return fail("mismatch on pair set " + std::to_string(seed));
  }
  const auto rows = testing::read_table("goemotions_bert_prf.tsv");
  std::vector<PRF> prf(28);
  for (const auto& [label, v] : rows) prf[space.index_of(label)] = {v[0], v[1], v[2]};
  const double macro = report_from_rows(space, prf).macro.f1;
  if (rows.size() != 28 || std::abs(macro - 0.51) > 0.01) return fail("published macro " + num(macro, 4));
  return pass("100/100 exact; published macro F1 " + num(macro, 4) + " vs 0.51");
}

Outcome minority_identification() {
  const char* path = std::getenv("EMOKIT_GOEMOTIONS_TRAIN");
  if (!path) {
    return {Status::kSkip, "warning: EMOKIT_GOEMOTIONS_TRAIN unset, real train split unavailable"};
  }
  const LabelSpace space = builtin_space("goemotions");
  const auto ds = load_tsv(path, space, Split::kTrain);
  const auto got = minority_labels(distribution(ds), 4);
  const LabelSet want = {space.index_of("grief"), space.index_of("pride"),
                         space.index_of("nervousness"), space.index_of("relief")};
  std::string names;
  for (auto i : got) names += space.label(i) + " ";
  return got == want ? pass(names) : fail(names);
}

double head_gradient_error() {
  const auto space = testing::toy_space();
  TinyEncoderOptions o;
  o.width = 8;
  Classifier model(TinyEncoder(o).clone(), space, ProblemKind::kMultiLabel, 9);
  Rng rng(2);
  for (double& w : model.head().weights.data()) w = 0.5 * rng.next_gaussian();
  const std::vector<std::string> texts = {"angercue1 joycue2 the", "fearcue3 so", "sadnesscue4 a"};
  const std::vector<LabelSet> gold = {{0, 1}, {2}, {3}};
  model.zero_grad();
  model.batch_loss(texts, gold, true);
  const auto analytic = model.head().weight_grads.data();
  auto& w = model.head().weights.data();
  double worst = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + 1e-6;
    const double up = model.batch_loss(texts, gold, false);
    w[i] = saved - 1e-6;
    const double down = model.batch_loss(texts, gold, false);
    w[i] = saved;
    const double numeric = (up - down) / 2e-6;
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

Outcome trainer_sanity() {
  const auto space = testing::toy_space();
  const auto train = testing::toy_dataset(space, 400, 1, Split::kTrain, "tr");
  const auto dev = testing::toy_dataset(space, 100, 2, Split::kDev, "dv");
  const auto test = testing::toy_dataset(space, 200, 3, Split::kTest, "te");
  RunConfig c;
  c.learning_rate = 0.05;
  c.epochs = 10;
  c.seed = 3;
  const auto result = fit(train, dev, c, TinyEncoder(TinyEncoderOptions{}));
  const double macro = evaluate(result.model, test, c).macro.f1;
  const auto& m = result.metas;
  const bool decreasing = m[1].mean_train_loss() < m[0].mean_train_loss() &&
                          m[2].mean_train_loss() < m[1].mean_train_loss();
  const double grad = head_gradient_error();
  const std::string detail = "held-out macro F1 " + num(macro, 4) + ", epoch losses " +
                             num(m[0].mean_train_loss(), 4) + " > " + num(m[1].mean_train_loss(), 4) +
                             " > " + num(m[2].mean_train_loss(), 4) + ", grad rel err " + sci(grad);
  return macro >= 0.95 && decreasing && grad <= 1e-4 ? pass(detail) : fail(detail);
}

Outcome transfer_mechanics() {
  const auto toy = testing::toy_space();
  const LabelSpace wide = builtin_space("goemotions");
  DatasetCatalog cat;
  cat.emplace("toy", TrainDevPair{testing::toy_dataset(toy, 200, 1),
                                  testing::toy_dataset(toy, 60, 2, Split::kDev, "d")});
  cat.emplace("wide", TrainDevPair{testing::random_dataset(wide, 100, 3), Dataset(wide, Split::kDev)});
  RunConfig c;
  c.learning_rate = 0.05;
  c.epochs = 3;
  const TinyEncoder enc{TinyEncoderOptions{}};
  const auto t = run_transfer({{"toy", c}, {"wide", c}, HeadPolicy::kReinitialize}, cat, enc);
  if (t.stage1.encoder_hash_end != t.stage2.encoder_hash_start) return fail("encoder hash changed between stages");

  const LabelSpace isear = builtin_space("isear");
  Dataset target(isear, Split::kTrain);
  const auto toy_target = testing::toy_dataset(LabelSpace("x", isear.labels()), 1500, 8);
  for (const auto& r : toy_target.records()) target.add(r);
  RunConfig sc = c;
  sc.epochs = 2;
  sc.problem_kind = ProblemKind::kSingleLabel;
  SweepOptions opts;
  opts.workers = 4;
  const auto report = run_lowdata_sweep(t.model, target,
                                        {SplitSize::count(100), SplitSize::count(200),
                                         SplitSize::count(500), SplitSize::count(1000),
                                         SplitSize::fraction(0.8)},
                                        10, sc, 17, opts);
  if (report.rows.size() != 50) return fail(std::to_string(report.rows.size()) + " sweep rows");
  for (const auto& s : report.summary) {
    if (s.runs != 10 || s.degenerate || !std::isfinite(s.macro_half_width)) return fail("bad interval");
  }
  return pass("hash " + std::to_string(t.stage2.encoder_hash_start) + " carried; 50 rows, 5 intervals");
}

Outcome llm_harness() {
  const LabelSpace space = builtin_space("goemotions");
  const auto corpus = testing::canned_corpus(space, 1000, 89, 812, 0, "gpt-4");
  llm::RetryPolicy retry;
  retry.sleep = [](std::chrono::milliseconds) {};
  llm::FunctionClient live([&](const std::string& req) { return corpus.response_for.at(req); });
  const auto dir = fs::temp_directory_path() / "emokit_acceptance_llm";
  fs::remove_all(dir);
  std::vector<std::string> replies;
  {
    llm::TranscriptLog log(dir / "transcript.jsonl");
    replies = llm::call_batches(corpus.batches, live, "gpt-4", retry, log, 2);
  }
  const auto report = testing::analyze_replies(corpus, replies, space);
  if (report.hallucination_examples != 89 || report.over_labelled != 812) {
    return fail("counters " + std::to_string(report.hallucination_examples) + "/" +
                std::to_string(report.over_labelled));
  }
  Rng rng(31337);
  const std::string alphabet = "ab,\"\n\r`1 2joy,neutral\t";
  for (int i = 0; i < 10000; ++i) {
    std::string s;
    const std::size_t len = rng.next_below(160);
    for (std::size_t k = 0; k < len; ++k) s += alphabet[rng.next_below(alphabet.size())];
    try {
      llm::parse_response(s, {"1", "2"}, space);
    } catch (const std::exception& e) {
      return fail(std::string("parse_response threw: ") + e.what());
    }
  }
  const auto entries = llm::TranscriptLog::read(dir / "transcript.jsonl");
  std::string first;
  for (int round = 0; round < 2; ++round) {
    llm::ReplayClient replay(entries);
    llm::TranscriptLog sink;
    const auto again = llm::call_batches(corpus.batches, replay, "gpt-4", retry, sink, 3);
    const auto json = testing::analyze_replies(corpus, again, space).to_json();
    if (round == 0) {
      first = json;
      if (json != report.to_json()) return fail("replay differs from live run");
    } else if (json != first) {
      return fail("replay not deterministic");
    }
  }
  fs::remove_all(dir);
  return pass("89 hallucinating, 812 over-labelled; 10000 fuzz inputs; replay identical");
}

Outcome taxonomy_validity() {
  const std::vector<std::pair<std::string, std::string>> pairs = {
      {"goemotions", "ekman"}, {"goemotions", "sentiment"}, {"ekman", "sentiment"}};
  for (const auto& [s, t] : pairs) {
    const auto r = validate_mapping(builtin_mapping(s, t));
    if (!r.ok()) return fail(s + "->" + t + ": " + r.to_string());
  }
  const auto n = builtin_space("ekman").size();
  if (n != 7) return fail("ekman has " + std::to_string(n) + " labels");
  return pass("3 packaged mappings valid; ekman has 7 labels");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"std_scaling_law", std_scaling},
      {"augmentation_invariants", augmentation_invariants},
      {"metrics_oracle_equivalence", metrics_oracle},
      {"minority_identification", minority_identification},
      {"trainer_sanity", trainer_sanity},
      {"transfer_mechanics", transfer_mechanics},
      {"llm_harness_fixtures", llm_harness},
      {"taxonomy_validity", taxonomy_validity},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kSkip ? "SKIP" : "FAIL";
    std::printf("%s %s: %s\n", tag, name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.status == Status::kFail;
  }
  return failures == 0 ? 0 : 1;
}
