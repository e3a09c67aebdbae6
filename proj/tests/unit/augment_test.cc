#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <sstream>

#include "emokit/augment.h"
#include "emokit/error.h"
#include "emokit/text.h"
#include "toy_data.h"

namespace emokit {
namespace {

// Replays the documented generator contract directly on mt19937_64.
struct OracleRng {
  std::mt19937_64 gen;
  explicit OracleRng(std::uint64_t seed) : gen(seed) {}
  std::uint64_t below(std::uint64_t n) {
    const unsigned __int128 span = static_cast<unsigned __int128>(1) << 64;
    const unsigned __int128 accept = (span / n) * n;
    for (;;) {
      const std::uint64_t x = gen();
      if (x < accept) return x % n;
    }
  }
  double unit() { return double(gen() >> 11) / 9007199254740992.0; }
};

std::vector<std::string> sorted_tokens(const std::string& s) {
  auto t = text::tokenize(s);
  std::sort(t.begin(), t.end());
  return t;
}

const Lexicon& lexicon() {
  static const Lexicon lex = Lexicon::builtin();
  return lex;
}

TEST(EditCount, CeilWithFloorOfOne) {
  EXPECT_EQ(edit_count(0.1, 1), 1u);
  EXPECT_EQ(edit_count(0.1, 10), 1u);
  EXPECT_EQ(edit_count(0.1, 11), 2u);
  EXPECT_EQ(edit_count(0.15, 20), 3u);
  EXPECT_EQ(edit_count(1.0, 7), 7u);
}

TEST(Policy, Defaults) {
  const AugmentationPolicy p;
  EXPECT_EQ(p.variants_per_example, 5u);
  EXPECT_DOUBLE_EQ(p.change_rate, 0.1);
  EXPECT_DOUBLE_EQ(p.op_probs[0], 1.0 / 3);
  const auto c = AugmentationPolicy::contextual_defaults();
  EXPECT_EQ(c.method, AugmentMethod::kContextual);
  EXPECT_DOUBLE_EQ(c.change_rate, 0.15);
  EXPECT_DOUBLE_EQ(c.p_insert, 0.5);
  EXPECT_EQ(c.top_k, 5u);
}

TEST(Policy, ValidateRejectsBadValues) {
  AugmentationPolicy p;
  p.variants_per_example = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.op_probs = {0.5, 0.5, 0.5};
  EXPECT_THROW(p.validate(), ConfigError);
  p = {};
  p.change_rate = 0;
  EXPECT_THROW(p.validate(), ConfigError);
}

TEST(Lexicon, StopwordsHaveNoSynonyms) {
  EXPECT_TRUE(lexicon().is_stopword("the"));
  EXPECT_TRUE(lexicon().synonyms("the").empty());
  EXPECT_FALSE(lexicon().synonyms("happy").empty());
}

TEST(Dda, SingleTokenDeleteAndSwapAreIdentity) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng a(seed), b(seed);
    const auto del = dda_apply("hello", DdaOp::kRandomDelete, 0.1, lexicon(), a);
    EXPECT_EQ(del.text, "hello");
    const auto swp = dda_apply("hello", DdaOp::kRandomSwap, 0.1, lexicon(), b);
    EXPECT_EQ(swp.text, "hello");
    EXPECT_EQ(swp.flags, std::vector<std::string>{"identity"});
  }
}

TEST(Dda, SwapReplaysGenerator) {
  for (std::uint64_t seed : {1ULL, 2ULL, 99ULL, 12345ULL}) {
    Rng rng(seed);
    const auto got = dda_apply("alpha beta gamma", DdaOp::kRandomSwap, 0.1, lexicon(), rng);
    OracleRng o(seed);
    std::vector<std::string> t = {"alpha", "beta", "gamma"};
    const auto i = o.below(3);
    auto j = o.below(2);
    if (j >= i) ++j;
    std::swap(t[i], t[j]);
    EXPECT_EQ(got.text, text::join(t)) << seed;
  }
}

TEST(Dda, VariantReplaysOperationDraw) {
  AugmentationPolicy p;
  p.op_probs = {0.0, 0.5, 0.5};
  const std::string s = "one two three four five";
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed);
    const auto got = dda_variant(s, p, lexicon(), rng);
    OracleRng o(seed);
    const double u = o.unit();
    std::vector<std::string> t = text::tokenize(s);
    if (u < 0.5) {
      const auto i = o.below(5);
      auto j = o.below(4);
      if (j >= i) ++j;
      std::swap(t[i], t[j]);
    } else {
      t.erase(t.begin() + static_cast<std::ptrdiff_t>(o.below(5)));
    }
    EXPECT_EQ(got, text::join(t)) << seed;
  }
}

TEST(Dda, SynonymReplaceKeepsPunctuationAndSkipsStopwords) {
  const Lexicon lex({{"happy", {"glad"}}}, {"the"});
  Rng rng(0);
  const auto out = dda_apply("the day, happy!", DdaOp::kSynonymReplace, 0.1, lex, rng);
  EXPECT_EQ(out.text, "the day, glad!");
  Rng rng2(0);
  const auto none = dda_apply("the day", DdaOp::kSynonymReplace, 0.1, lex, rng2);
  EXPECT_EQ(none.text, "the day");
  EXPECT_EQ(none.flags, std::vector<std::string>{"identity"});
}

TEST(Dda, PropertyInvariants) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 1000, 77);
  for (const auto& r : ds.records()) {
    Rng rng(derive_seed(5, r.id));
    const auto swapped = dda_apply(r.text, DdaOp::kRandomSwap, 0.1, lexicon(), rng);
    EXPECT_EQ(sorted_tokens(swapped.text), sorted_tokens(r.text));
    const auto deleted = dda_apply(r.text, DdaOp::kRandomDelete, 0.3, lexicon(), rng);
    const auto before = sorted_tokens(r.text);
    const auto after = sorted_tokens(deleted.text);
    EXPECT_FALSE(after.empty());
    EXPECT_TRUE(std::includes(before.begin(), before.end(), after.begin(), after.end()));
    const auto replaced = dda_apply(r.text, DdaOp::kSynonymReplace, 0.1, lexicon(), rng);
    EXPECT_EQ(text::tokenize(replaced.text).size(), before.size());
  }
}

TEST(Contextual, StubInsertionAtSeededPosition) {
  // Find a seed whose first position draw is 1, per the documented sequence.
  std::uint64_t seed = 0;
  for (;; ++seed) {
    OracleRng o(seed);
    o.unit();
    if (o.below(3) == 1) break;
  }
  AugmentationPolicy p = AugmentationPolicy::contextual_defaults();
  p.p_insert = 1.0;
  const FixedMaskedLM lm({{"x", 1.0}});
  Rng rng(seed);
  EXPECT_EQ(contextual_variant("a b", p, lm, rng), "a x b");
}

TEST(Contextual, SingleTokenReplace) {
  AugmentationPolicy p = AugmentationPolicy::contextual_defaults();
  p.p_insert = 0.0;
  p.change_rate = 0.01;
  const FixedMaskedLM lm({{"x", 1.0}});
  Rng rng(3);
  EXPECT_EQ(contextual_variant("hello", p, lm, rng), "x");
}

TEST(Contextual, EmptyCandidatesRaiseBackendError) {
  AugmentationPolicy p = AugmentationPolicy::contextual_defaults();
  const FixedMaskedLM lm(std::vector<Candidate>{});
  Rng rng(0);
  try {
    contextual_variant("a b c", p, lm, rng, "rec-7");
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.record_id(), "rec-7");
  }
}

TEST(Contextual, CooccurrenceBackendProposesCorpusWords) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 200, 4);
  const CooccurrenceMaskedLM lm(ds);
  const auto c = lm.candidates({"i", MaskedLMBackend::kMaskToken, "this"}, 1);
  ASSERT_FALSE(c.empty());
  for (std::size_t i = 1; i < c.size(); ++i) EXPECT_GE(c[i - 1].score, c[i].score);
}

TEST(Paraphrase, EchoIsDegenerate) {
  const auto out = paraphrase_variants("hi there", 1, EchoParaphraser());
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].text, "hi there");
  EXPECT_EQ(out[0].flags, std::vector<std::string>{"degenerate"});
}

TEST(Paraphrase, FixtureVerbatim) {
  const std::vector<std::string> five = {"p1", "p2", "p3", "p4", "p5"};
  const FixtureParaphraser fx({{"src", five}});
  const auto out = paraphrase_variants("src", 5, fx);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(out[i].text, five[i]);
    EXPECT_TRUE(out[i].flags.empty());
  }
}

TEST(Paraphrase, PadsShortFixtures) {
  const FixtureParaphraser fx({{"src", {"p1", "p2", "p3"}}});
  const auto out = paraphrase_variants("src", 5, fx);
  ASSERT_EQ(out.size(), 5u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(out[i].flags.empty());
  for (std::size_t i = 3; i < 5; ++i) {
    EXPECT_EQ(out[i].text, "p3");
    EXPECT_EQ(out[i].flags, std::vector<std::string>{"degenerate"});
  }
  EXPECT_THROW(paraphrase_variants("src", 0, fx), ConfigError);
}

TEST(Expand, CountLawAtCorpusScale) {
  // 43,410 originals, each with five variants.
  const LabelSpace space = builtin_space("goemotions");
  Dataset ds(space, Split::kTrain);
  for (std::size_t i = 0; i < 43410; ++i) {
    ds.add({"g" + std::to_string(i), "so happy today friend", {i % 28}, {}});
  }
  AugmentationPolicy p;
  p.workers = 4;
  const auto out = expand(ds, p, {&lexicon(), nullptr, nullptr});
  EXPECT_EQ(out.dataset.size(), 260460u);
  EXPECT_EQ(out.manifest.size(), 43410u * 5);
}

TEST(Expand, ScopedToGrief) {
  const LabelSpace space = builtin_space("goemotions");
  Dataset ds(space, Split::kTrain);
  const auto grief = space.index_of("grief");
  for (std::size_t i = 0; i < 39; ++i) ds.add({"g" + std::to_string(i), "lost my dog", {grief}, {}});
  for (std::size_t i = 0; i < 300; ++i) ds.add({"o" + std::to_string(i), "great game", {0}, {}});
  AugmentationPolicy p;
  p.scope_labels = LabelSet{grief};
  const auto out = expand(ds, p, {&lexicon(), nullptr, nullptr});
  EXPECT_EQ(out.dataset.size(), ds.size() + 195);
}

TEST(Expand, EmptyScopeIsIdentity) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 100, 2);
  AugmentationPolicy p;
  p.scope_labels = LabelSet{};
  const auto out = expand(ds, p, {&lexicon(), nullptr, nullptr});
  ASSERT_EQ(out.dataset.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(out.dataset[i].text, ds[i].text);
  EXPECT_TRUE(out.manifest.empty());
}

TEST(Expand, LabelsAndProvenance) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 200, 6);
  AugmentationPolicy p;
  p.variants_per_example = 3;
  const auto out = expand(ds, p, {&lexicon(), nullptr, nullptr});
  ASSERT_EQ(out.dataset.size(), 800u);
  std::map<std::string, LabelSet> parents;
  for (const auto& r : ds.records()) parents[r.id] = r.label_ids;
  for (std::size_t i = 0; i < out.dataset.size(); ++i) {
    const auto& r = out.dataset[i];
    if (i % 4 == 0) {
      EXPECT_FALSE(r.provenance.augmented);
      continue;
    }
    EXPECT_TRUE(r.provenance.augmented);
    EXPECT_EQ(r.label_ids, parents.at(r.provenance.parent_id));
    EXPECT_EQ(r.id, child_id(r.provenance.parent_id, AugmentMethod::kDda, (i % 4) - 1));
  }
}

TEST(Expand, StdScalesBySix) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 500, 12);
  const auto out = expand(ds, AugmentationPolicy{}, {&lexicon(), nullptr, nullptr});
  EXPECT_NEAR(distribution(out.dataset).std / distribution(ds).std, 6.0, 6e-9);
}

TEST(Expand, DeterministicAcrossWorkerCounts) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 300, 13);
  for (AugmentMethod method : {AugmentMethod::kDda, AugmentMethod::kContextual,
                               AugmentMethod::kParaphrase}) {
    AugmentationPolicy p = method == AugmentMethod::kContextual
                               ? AugmentationPolicy::contextual_defaults()
                               : AugmentationPolicy{};
    p.method = method;
    p.seed = 8;
    const CooccurrenceMaskedLM lm(ds);
    const LexiconParaphraser para(lexicon());
    const AugmentBackends b{&lexicon(), &lm, &para};
    std::ostringstream one, four;
    p.workers = 1;
    write_tsv(one, expand(ds, p, b).dataset);
    p.workers = 4;
    write_tsv(four, expand(ds, p, b).dataset);
    EXPECT_EQ(one.str(), four.str()) << to_string(method);
  }
}

class FailingLM : public MaskedLMBackend {
 public:
  std::vector<Candidate> candidates(const std::vector<std::string>& tokens,
                                    std::size_t) const override {
    for (const auto& t : tokens) {
      if (t == "poison") return {};
    }
    return {{"ok", 1.0}};
  }
};

TEST(Expand, BackendFailureAbortsWithPartialManifest) {
  const LabelSpace space("two", {"a", "b"});
  Dataset ds(space, Split::kTrain);
  ds.add({"r0", "fine words here", {0}, {}});
  ds.add({"r1", "poison poison poison", {1}, {}});
  ds.add({"r2", "more fine words", {0}, {}});
  AugmentationPolicy p = AugmentationPolicy::contextual_defaults();
  p.method = AugmentMethod::kContextual;
  FailingLM lm;
  try {
    expand(ds, p, {nullptr, &lm, nullptr});
    FAIL();
  } catch (const ExpansionAborted& e) {
    EXPECT_EQ(e.record_id(), "r1");
    for (const auto& m : e.manifest()) EXPECT_NE(m.parent_id, "r1");
  }
}

TEST(Expand, MissingBackendIsAConfigError) {
  const auto ds = testing::random_dataset(builtin_space("goemotions"), 5, 1);
  AugmentationPolicy p;
  p.method = AugmentMethod::kParaphrase;
  EXPECT_THROW(expand(ds, p, {&lexicon(), nullptr, nullptr}), ConfigError);
}

TEST(Manifest, Format) {
  std::ostringstream out;
  write_manifest(out, {{"a#dda-1", "a", AugmentMethod::kDda, {}},
                       {"a#paraphrase-2", "a", AugmentMethod::kParaphrase,
                        {"degenerate", "identity"}}});
  EXPECT_EQ(out.str(),
            "a#dda-1\ta\tdda\t-\na#paraphrase-2\ta\tparaphrase\tdegenerate,identity\n");
}

}  // namespace
}  // namespace emokit
