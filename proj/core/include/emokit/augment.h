#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "emokit/corpus.h"
#include "emokit/error.h"
#include "emokit/rng.h"

namespace emokit {

enum class DdaOp { kSynonymReplace = 0, kRandomSwap = 1, kRandomDelete = 2 };

std::string_view to_string(DdaOp op);

struct AugmentationPolicy {
  AugmentMethod method = AugmentMethod::kDda;
  std::size_t variants_per_example = 5;

  // nullopt scopes every record; otherwise only records whose label set
  // intersects these labels are expanded.
  std::optional<LabelSet> scope_labels;

  // Weights over {synonym_replace, random_swap, random_delete}.
  std::array<double, 3> op_probs = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  double change_rate = 0.1;

  // Contextual method.
  double p_insert = 0.5;
  std::size_t top_k = 5;

  std::uint64_t seed = 0;

  // Worker threads used by expand(); never affects output.
  std::size_t workers = 1;

  // Defaults for the contextual method (change_rate 0.15).
  static AugmentationPolicy contextual_defaults();

  // Throws ConfigError on op_probs not summing to 1, change_rate outside
  // (0, 1], zero variants, p_insert outside [0, 1] or top_k == 0.
  void validate() const;
};

// Number of edits an operation makes on a text of `tokens` tokens:
// ceil(change_rate * tokens), at least 1.
std::size_t edit_count(double change_rate, std::size_t tokens);

// Synonym dictionary plus the stopwords synonym replacement must skip.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::map<std::string, std::vector<std::string>> synonyms,
          std::set<std::string> stopwords);

  // Packaged synonyms.tsv and stopwords.txt.
  static Lexicon builtin();
  static Lexicon load(const std::filesystem::path& synonyms,
                      const std::filesystem::path& stopwords);

  // Synonyms for a lowercased token core; empty when absent or a stopword.
  const std::vector<std::string>& synonyms(const std::string& word) const;
  bool is_stopword(const std::string& word) const;

 private:
  std::map<std::string, std::vector<std::string>> synonyms_;
  std::set<std::string> stopwords_;
};

struct VariantResult {
  std::string text;
  std::vector<std::string> flags;
};

// One DDA variant. Draw sequence (see Rng):
//   1. op = pick_weighted(op_probs)
//   2. n  = edit_count(change_rate, token count)
//   swap:    if fewer than 2 tokens, identity. Else n times:
//            i = next_below(len); j = next_below(len - 1); if (j >= i) ++j;
//            swap(tokens[i], tokens[j]).
//   delete:  n times, stopping once one token remains:
//            erase tokens[next_below(len)].
//   replace: candidates = positions whose lowercased core is not a stopword
//            and has synonyms, ascending. n times while candidates remain:
//            k = next_below(|candidates|); pos = candidates[k]; erase k;
//            syn = synonyms[next_below(|synonyms|)]; the core is replaced and
//            edge punctuation kept.
// Operations that cannot change anything return the input flagged
// "identity".
VariantResult dda_variant_ex(const std::string& text,
                             const AugmentationPolicy& policy,
                             const Lexicon& lexicon, Rng& rng);
std::string dda_variant(const std::string& text,
                        const AugmentationPolicy& policy,
                        const Lexicon& lexicon, Rng& rng);

// Same but with the operation fixed instead of drawn (no step-1 draw).
VariantResult dda_apply(const std::string& text, DdaOp op, double change_rate,
                        const Lexicon& lexicon, Rng& rng);

struct Candidate {
  std::string token;
  double score = 0.0;
};

// Masked language model: given tokens with tokens[position] being the mask
// token, returns candidates ranked by descending score.
class MaskedLMBackend {
 public:
  static constexpr const char* kMaskToken = "[MASK]";

  virtual ~MaskedLMBackend() = default;
  virtual std::vector<Candidate> candidates(
      const std::vector<std::string>& tokens, std::size_t position) const = 0;
  // When false, expand() serializes calls.
  virtual bool concurrent_safe() const { return true; }
};

// Contextual variant. Draw sequence per edit, for
// edit_count(change_rate, token count) edits:
//   u = next_unit(); insert when u < p_insert.
//   insert:  pos = next_below(len + 1); the mask is inserted at pos.
//   replace: pos = next_below(len); tokens[pos] becomes the mask.
//   The backend ranks candidates; candidates equal to the replaced token are
//   dropped when others exist; choice = next_below(min(top_k, |ranked|)).
// Empty candidate lists raise BackendError carrying `record_id`.
std::string contextual_variant(const std::string& text,
                               const AugmentationPolicy& policy,
                               const MaskedLMBackend& backend, Rng& rng,
                               const std::string& record_id = {});

class ParaphraseBackend {
 public:
  virtual ~ParaphraseBackend() = default;
  // Up to `diversity` paraphrases of `text`.
  virtual std::vector<std::string> paraphrase(const std::string& text,
                                              std::size_t diversity) const = 0;
  virtual bool concurrent_safe() const { return true; }
};

// n outputs. Backend outputs are deduplicated in order and empties dropped;
// when fewer than n remain, the last output (or the source text) is repeated
// and the repeats are flagged "degenerate". An output equal to the source
// text is also flagged "degenerate".
std::vector<VariantResult> paraphrase_variants(
    const std::string& text, std::size_t n, const ParaphraseBackend& backend);

struct AugmentBackends {
  const Lexicon* lexicon = nullptr;
  const MaskedLMBackend* masked_lm = nullptr;
  const ParaphraseBackend* paraphraser = nullptr;
};

// `child_id<TAB>parent_id<TAB>method<TAB>flags` per augmented record.
struct ManifestEntry {
  std::string child_id;
  std::string parent_id;
  AugmentMethod method = AugmentMethod::kDda;
  std::vector<std::string> flags;
};

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries);

struct ExpandResult {
  Dataset dataset;
  std::vector<ManifestEntry> manifest;
};

// Raised by expand() when a backend fails. `manifest()` lists the children
// generated before the failure, for the records that completed.
class ExpansionAborted : public BackendError {
 public:
  ExpansionAborted(const BackendError& cause,
                   std::vector<ManifestEntry> partial)
      : BackendError(cause.what(), cause.record_id()),
        partial_(std::move(partial)) {}

  const std::vector<ManifestEntry>& manifest() const noexcept {
    return partial_;
  }

 private:
  std::vector<ManifestEntry> partial_;
};

// Child id for the k-th (0-based) variant of a parent.
std::string child_id(const std::string& parent_id, AugmentMethod method,
                     std::size_t k);

// Every original in order, each in-scope one immediately followed by its
// variants_per_example children (label sets copied from the parent). Each
// record draws from its own generator seeded with
// derive_seed(policy.seed, record.id), so worker count never changes output.
ExpandResult expand(const Dataset& dataset, const AugmentationPolicy& policy,
                    const AugmentBackends& backends);

// Test and offline backends.

// Returns the same fixed candidate list for every query.
class FixedMaskedLM : public MaskedLMBackend {
 public:
  explicit FixedMaskedLM(std::vector<Candidate> ranked)
      : ranked_(std::move(ranked)) {}
  std::vector<Candidate> candidates(const std::vector<std::string>& tokens,
                                    std::size_t position) const override;

 private:
  std::vector<Candidate> ranked_;
};

// Ranks tokens by how often they appear between the neighbouring tokens
// in a reference corpus (left/right bigram counts, add-one smoothed), with
// unigram frequency breaking ties. A cheap stand-in for a real masked LM.
class CooccurrenceMaskedLM : public MaskedLMBackend {
 public:
  explicit CooccurrenceMaskedLM(const Dataset& corpus,
                                std::size_t vocabulary_limit = 2000);
  std::vector<Candidate> candidates(const std::vector<std::string>& tokens,
                                    std::size_t position) const override;

 private:
  std::vector<std::string> vocab_;
  std::vector<double> unigram_;
  std::map<std::pair<std::string, std::string>, double> bigram_;
};

// Returns the input text unchanged.
class EchoParaphraser : public ParaphraseBackend {
 public:
  std::vector<std::string> paraphrase(const std::string& text,
                                      std::size_t diversity) const override;
};

// Canned paraphrases keyed by source text; unknown texts echo.
// File format: source<TAB>paraphrase per line, repeated per paraphrase.
class FixtureParaphraser : public ParaphraseBackend {
 public:
  FixtureParaphraser() = default;
  explicit FixtureParaphraser(
      std::map<std::string, std::vector<std::string>> table)
      : table_(std::move(table)) {}
  static FixtureParaphraser load(const std::filesystem::path& path);

  std::vector<std::string> paraphrase(const std::string& text,
                                      std::size_t diversity) const override;

 private:
  std::map<std::string, std::vector<std::string>> table_;
};

// Whole-sentence rewrites built from lexicon substitutions: the i-th
// paraphrase replaces every substitutable word, cycling through synonym
// choices so outputs differ. Deterministic and offline.
class LexiconParaphraser : public ParaphraseBackend {
 public:
  explicit LexiconParaphraser(const Lexicon& lexicon) : lexicon_(&lexicon) {}
  std::vector<std::string> paraphrase(const std::string& text,
                                      std::size_t diversity) const override;

 private:
  const Lexicon* lexicon_;
};

}  // namespace emokit
