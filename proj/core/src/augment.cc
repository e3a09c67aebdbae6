#include "emokit/augment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <ostream>
#include <thread>

#include "emokit/text.h"

namespace emokit {
namespace {

const std::vector<std::string> kNoSynonyms;

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  return in;
}

// Locks around a backend that is not safe for concurrent calls.
class SerializedMaskedLM : public MaskedLMBackend {
 public:
  explicit SerializedMaskedLM(const MaskedLMBackend& inner) : inner_(inner) {}
  std::vector<Candidate> candidates(const std::vector<std::string>& tokens,
                                    std::size_t position) const override {
    std::lock_guard lock(mutex_);
    return inner_.candidates(tokens, position);
  }

 private:
  const MaskedLMBackend& inner_;
  mutable std::mutex mutex_;
};

class SerializedParaphraser : public ParaphraseBackend {
 public:
  explicit SerializedParaphraser(const ParaphraseBackend& inner) : inner_(inner) {}
  std::vector<std::string> paraphrase(const std::string& text,
                                      std::size_t diversity) const override {
    std::lock_guard lock(mutex_);
    return inner_.paraphrase(text, diversity);
  }

 private:
  const ParaphraseBackend& inner_;
  mutable std::mutex mutex_;
};

}  // namespace

std::string_view to_string(DdaOp op) {
  switch (op) {
    case DdaOp::kSynonymReplace: return "synonym_replace";
    case DdaOp::kRandomSwap: return "random_swap";
    case DdaOp::kRandomDelete: return "random_delete";
  }
  return "synonym_replace";
}

AugmentationPolicy AugmentationPolicy::contextual_defaults() {
  AugmentationPolicy p;
  p.method = AugmentMethod::kContextual;
  p.change_rate = 0.15;
  return p;
}

void AugmentationPolicy::validate() const {
  if (variants_per_example == 0) {
    throw ConfigError("variants_per_example must be at least 1");
  }
  double total = 0.0;
  for (double p : op_probs) {
    if (p < 0.0) throw ConfigError("op_probs must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("op_probs must sum to 1");
  }
  if (!(change_rate > 0.0 && change_rate <= 1.0)) {
    throw ConfigError("change_rate must lie in (0, 1]");
  }
  if (!(p_insert >= 0.0 && p_insert <= 1.0)) {
    throw ConfigError("p_insert must lie in [0, 1]");
  }
  if (top_k == 0) throw ConfigError("top_k must be at least 1");
}

std::size_t edit_count(double change_rate, std::size_t tokens) {
  const auto n = static_cast<std::size_t>(std::ceil(change_rate * double(tokens)));
  return std::max<std::size_t>(1, n);
}

Lexicon::Lexicon(std::map<std::string, std::vector<std::string>> synonyms,
                 std::set<std::string> stopwords)
    : synonyms_(std::move(synonyms)), stopwords_(std::move(stopwords)) {}

Lexicon Lexicon::builtin() {
  const auto dir = data_dir() / "augment";
  return load(dir / "synonyms.tsv", dir / "stopwords.txt");
}

Lexicon Lexicon::load(const std::filesystem::path& synonyms,
                      const std::filesystem::path& stopwords) {
  std::map<std::string, std::vector<std::string>> table;
  std::set<std::string> stop;
  {
    std::ifstream in = open_input(synonyms);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string_view t = text::trim(line);
      if (t.empty() || t.front() == '#') continue;
      const auto fields = text::split(t, '\t');
      if (fields.size() != 2) throw ParseError("expected word<TAB>synonyms", line_no);
      auto& list = table[text::to_lower(text::trim(fields[0]))];
      for (const auto& s : text::split(fields[1], ',')) {
        const std::string_view syn = text::trim(s);
        if (!syn.empty()) list.emplace_back(syn);
      }
    }
  }
  {
    std::ifstream in = open_input(stopwords);
    std::string line;
    while (std::getline(in, line)) {
      const std::string_view t = text::trim(line);
      if (!t.empty() && t.front() != '#') stop.insert(text::to_lower(t));
    }
  }
  return Lexicon(std::move(table), std::move(stop));
}

const std::vector<std::string>& Lexicon::synonyms(const std::string& word) const {
  if (is_stopword(word)) return kNoSynonyms;
  auto it = synonyms_.find(word);
  return it == synonyms_.end() ? kNoSynonyms : it->second;
}

bool Lexicon::is_stopword(const std::string& word) const {
  return stopwords_.count(word) != 0;
}

VariantResult dda_apply(const std::string& text, DdaOp op, double change_rate,
                        const Lexicon& lexicon, Rng& rng) {
  std::vector<std::string> tokens = text::tokenize(text);
  if (tokens.empty()) return {text, {"identity"}};
  const std::size_t edits = edit_count(change_rate, tokens.size());
  bool changed = false;

  switch (op) {
    case DdaOp::kRandomSwap: {
      if (tokens.size() < 2) break;
      for (std::size_t e = 0; e < edits; ++e) {
        const auto i = static_cast<std::size_t>(rng.next_below(tokens.size()));
        auto j = static_cast<std::size_t>(rng.next_below(tokens.size() - 1));
        if (j >= i) ++j;
        std::swap(tokens[i], tokens[j]);
        changed = true;
      }
      break;
    }
    case DdaOp::kRandomDelete: {
      for (std::size_t e = 0; e < edits && tokens.size() > 1; ++e) {
        const auto i = static_cast<std::size_t>(rng.next_below(tokens.size()));
        tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
      }
      break;
    }
    case DdaOp::kSynonymReplace: {
      std::vector<std::size_t> candidates;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto core = text::split_core(tokens[i]).core;
        if (!core.empty() && !lexicon.synonyms(text::to_lower(core)).empty()) {
          candidates.push_back(i);
        }
      }
      for (std::size_t e = 0; e < edits && !candidates.empty(); ++e) {
        const auto k = static_cast<std::size_t>(rng.next_below(candidates.size()));
        const std::size_t pos = candidates[k];
        candidates.erase(candidates.begin() + static_cast<std::ptrdiff_t>(k));
        auto parts = text::split_core(tokens[pos]);
        const auto& syns = lexicon.synonyms(text::to_lower(parts.core));
        const std::string& syn = syns[rng.next_below(syns.size())];
        tokens[pos] = parts.prefix + syn + parts.suffix;
        changed = true;
      }
      break;
    }
  }
  if (!changed) return {text, {"identity"}};
  return {text::join(tokens), {}};
}

VariantResult dda_variant_ex(const std::string& text,
                             const AugmentationPolicy& policy,
                             const Lexicon& lexicon, Rng& rng) {
  const auto op = static_cast<DdaOp>(rng.pick_weighted(policy.op_probs));
  return dda_apply(text, op, policy.change_rate, lexicon, rng);
}

std::string dda_variant(const std::string& text,
                        const AugmentationPolicy& policy,
                        const Lexicon& lexicon, Rng& rng) {
  return dda_variant_ex(text, policy, lexicon, rng).text;
}

std::string contextual_variant(const std::string& text,
                               const AugmentationPolicy& policy,
                               const MaskedLMBackend& backend, Rng& rng,
                               const std::string& record_id) {
  std::vector<std::string> tokens = text::tokenize(text);
  if (tokens.empty()) return text;
  const std::size_t edits = edit_count(policy.change_rate, tokens.size());
  for (std::size_t e = 0; e < edits; ++e) {
    const bool insert = rng.next_unit() < policy.p_insert;
    std::size_t pos = 0;
    std::string replaced;
    if (insert) {
      pos = static_cast<std::size_t>(rng.next_below(tokens.size() + 1));
      tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos),
                    MaskedLMBackend::kMaskToken);
    } else {
      pos = static_cast<std::size_t>(rng.next_below(tokens.size()));
      replaced = tokens[pos];
      tokens[pos] = MaskedLMBackend::kMaskToken;
    }
    std::vector<Candidate> ranked;
    try {
      ranked = backend.candidates(tokens, pos);
    } catch (const BackendError&) {
      throw;
    } catch (const std::exception& ex) {
      throw BackendError(std::string("masked LM failed: ") + ex.what(), record_id);
    }
    if (!replaced.empty()) {
      std::vector<Candidate> differing;
      for (const auto& c : ranked) {
        if (c.token != replaced) differing.push_back(c);
      }
      if (!differing.empty()) ranked = std::move(differing);
    }
    if (ranked.empty()) {
      throw BackendError("masked LM returned no candidates", record_id);
    }
    const std::size_t pool = std::min(policy.top_k, ranked.size());
    tokens[pos] = ranked[rng.next_below(pool)].token;
  }
  return text::join(tokens);
}

std::vector<VariantResult> paraphrase_variants(const std::string& text,
                                               std::size_t n,
                                               const ParaphraseBackend& backend) {
  if (n == 0) throw ConfigError("paraphrase count must be at least 1");
  std::vector<std::string> raw;
  try {
    raw = backend.paraphrase(text, n);
  } catch (const BackendError&) {
    throw;
  } catch (const std::exception& ex) {
    throw BackendError(std::string("paraphraser failed: ") + ex.what());
  }
  std::vector<VariantResult> out;
  std::set<std::string> seen;
  for (auto& p : raw) {
    if (out.size() == n) break;
    if (text::trim(p).empty() || !seen.insert(p).second) continue;
    VariantResult v{p, {}};
    if (p == text) v.flags.push_back("degenerate");
    out.push_back(std::move(v));
  }
  const std::string pad = out.empty() ? text : out.back().text;
  while (out.size() < n) out.push_back({pad, {"degenerate"}});
  return out;
}

void write_manifest(std::ostream& out, const std::vector<ManifestEntry>& entries) {
  for (const auto& e : entries) {
    out << e.child_id << '\t' << e.parent_id << '\t' << to_string(e.method)
        << '\t';
    if (e.flags.empty()) {
      out << '-';
    } else {
      for (std::size_t i = 0; i < e.flags.size(); ++i) {
        if (i) out << ',';
        out << e.flags[i];
      }
    }
    out << '\n';
  }
}

std::string child_id(const std::string& parent_id, AugmentMethod method,
                     std::size_t k) {
  return parent_id + "#" + std::string(to_string(method)) + "-" +
         std::to_string(k + 1);
}

namespace {

bool in_scope(const ExampleRecord& r, const AugmentationPolicy& policy) {
  if (!policy.scope_labels) return true;
  for (std::size_t l : r.label_ids) {
    if (policy.scope_labels->count(l)) return true;
  }
  return false;
}

std::vector<VariantResult> make_variants(const ExampleRecord& r,
                                         const AugmentationPolicy& policy,
                                         const AugmentBackends& backends) {
  std::vector<VariantResult> out;
  Rng rng(derive_seed(policy.seed, r.id));
  switch (policy.method) {
    case AugmentMethod::kDda:
      for (std::size_t k = 0; k < policy.variants_per_example; ++k) {
        out.push_back(dda_variant_ex(r.text, policy, *backends.lexicon, rng));
      }
      break;
    case AugmentMethod::kContextual:
      for (std::size_t k = 0; k < policy.variants_per_example; ++k) {
        out.push_back({contextual_variant(r.text, policy, *backends.masked_lm,
                                          rng, r.id),
                       {}});
      }
      break;
    case AugmentMethod::kParaphrase:
      try {
        out = paraphrase_variants(r.text, policy.variants_per_example,
                                  *backends.paraphraser);
      } catch (const BackendError& e) {
        throw BackendError(e.what(), r.id);
      }
      break;
  }
  return out;
}

}  // namespace

ExpandResult expand(const Dataset& dataset, const AugmentationPolicy& policy,
                    const AugmentBackends& backends) {
  policy.validate();
  if (policy.scope_labels && !policy.scope_labels->empty() &&
      *policy.scope_labels->rbegin() >= dataset.space().size()) {
    throw InvalidLabel("augmentation scope label outside the dataset space");
  }
  AugmentBackends effective = backends;
  std::optional<SerializedMaskedLM> serial_lm;
  std::optional<SerializedParaphraser> serial_para;
  switch (policy.method) {
    case AugmentMethod::kDda:
      if (!backends.lexicon) throw ConfigError("dda augmentation needs a lexicon");
      break;
    case AugmentMethod::kContextual:
      if (!backends.masked_lm) throw ConfigError("contextual augmentation needs a masked LM backend");
      if (!backends.masked_lm->concurrent_safe()) {
        serial_lm.emplace(*backends.masked_lm);
        effective.masked_lm = &*serial_lm;
      }
      break;
    case AugmentMethod::kParaphrase:
      if (!backends.paraphraser) throw ConfigError("paraphrase augmentation needs a paraphrase backend");
      if (!backends.paraphraser->concurrent_safe()) {
        serial_para.emplace(*backends.paraphraser);
        effective.paraphraser = &*serial_para;
      }
      break;
  }

  const auto& records = dataset.records();
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].provenance.augmented && in_scope(records[i], policy)) {
      targets.push_back(i);
    }
  }

  // Variants per target; a slot stays empty when its record failed.
  std::vector<std::optional<std::vector<VariantResult>>> produced(targets.size());
  std::vector<std::optional<BackendError>> failures(targets.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  auto worker = [&] {
    for (;;) {
      if (stop.load()) return;
      const std::size_t t = next.fetch_add(1);
      if (t >= targets.size()) return;
      try {
        produced[t] = make_variants(records[targets[t]], policy, effective);
      } catch (const BackendError& e) {
        failures[t] = BackendError(e.what(), e.record_id().empty()
                                                 ? records[targets[t]].id
                                                 : e.record_id());
        stop.store(true);
      }
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(policy.workers, targets.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }

  auto manifest_for = [&](std::size_t t) {
    std::vector<ManifestEntry> out;
    const auto& parent = records[targets[t]];
    for (std::size_t k = 0; k < produced[t]->size(); ++k) {
      out.push_back({child_id(parent.id, policy.method, k), parent.id,
                     policy.method, (*produced[t])[k].flags});
    }
    return out;
  };

  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (failures[t]) {
      std::vector<ManifestEntry> partial;
      for (std::size_t u = 0; u < targets.size(); ++u) {
        if (!produced[u]) continue;
        auto m = manifest_for(u);
        partial.insert(partial.end(), m.begin(), m.end());
      }
      throw ExpansionAborted(*failures[t], std::move(partial));
    }
  }

  ExpandResult result{Dataset(dataset.space(), dataset.split()), {}};
  std::size_t t = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    result.dataset.add(records[i]);
    if (t < targets.size() && targets[t] == i) {
      const auto entries = manifest_for(t);
      for (std::size_t k = 0; k < entries.size(); ++k) {
        ExampleRecord child;
        child.id = entries[k].child_id;
        child.text = (*produced[t])[k].text;
        child.label_ids = records[i].label_ids;
        child.provenance = {true, policy.method, records[i].id, entries[k].flags};
        result.dataset.add(std::move(child));
      }
      result.manifest.insert(result.manifest.end(), entries.begin(), entries.end());
      ++t;
    }
  }
  return result;
}

std::vector<Candidate> FixedMaskedLM::candidates(const std::vector<std::string>&,
                                                 std::size_t) const {
  return ranked_;
}

CooccurrenceMaskedLM::CooccurrenceMaskedLM(const Dataset& corpus,
                                           std::size_t vocabulary_limit) {
  std::map<std::string, double> counts;
  for (const auto& r : corpus.records()) {
    const auto tokens = text::tokenize(r.text);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      counts[tokens[i]] += 1.0;
      if (i + 1 < tokens.size()) bigram_[{tokens[i], tokens[i + 1]}] += 1.0;
    }
  }
  std::vector<std::pair<std::string, double>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > vocabulary_limit) ranked.resize(vocabulary_limit);
  for (auto& [tok, c] : ranked) {
    vocab_.push_back(tok);
    unigram_.push_back(c);
  }
}

std::vector<Candidate> CooccurrenceMaskedLM::candidates(
    const std::vector<std::string>& tokens, std::size_t position) const {
  const std::string* left = position > 0 ? &tokens[position - 1] : nullptr;
  const std::string* right =
      position + 1 < tokens.size() ? &tokens[position + 1] : nullptr;
  std::vector<Candidate> out;
  out.reserve(vocab_.size());
  double total = 0.0;
  for (double c : unigram_) total += c;
  for (std::size_t v = 0; v < vocab_.size(); ++v) {
    double score = std::log(unigram_[v] / total) * 1e-3;
    if (left) {
      auto it = bigram_.find({*left, vocab_[v]});
      score += std::log(1.0 + (it == bigram_.end() ? 0.0 : it->second));
    }
    if (right) {
      auto it = bigram_.find({vocab_[v], *right});
      score += std::log(1.0 + (it == bigram_.end() ? 0.0 : it->second));
    }
    out.push_back({vocab_[v], score});
  }
  std::stable_sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.score > b.score;
  });
  if (out.size() > 50) out.resize(50);
  return out;
}

std::vector<std::string> EchoParaphraser::paraphrase(const std::string& text,
                                                     std::size_t) const {
  return {text};
}

FixtureParaphraser FixtureParaphraser::load(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::map<std::string, std::vector<std::string>> table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, '\t');
    if (fields.size() != 2) throw ParseError("expected source<TAB>paraphrase", line_no);
    table[fields[0]].push_back(fields[1]);
  }
  return FixtureParaphraser(std::move(table));
}

std::vector<std::string> FixtureParaphraser::paraphrase(const std::string& text,
                                                        std::size_t diversity) const {
  auto it = table_.find(text);
  if (it == table_.end()) return {text};
  std::vector<std::string> out = it->second;
  if (out.size() > diversity) out.resize(diversity);
  return out;
}

std::vector<std::string> LexiconParaphraser::paraphrase(const std::string& text,
                                                        std::size_t diversity) const {
  const auto tokens = text::tokenize(text);
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto core = text::split_core(tokens[i]).core;
    if (!core.empty() && !lexicon_->synonyms(text::to_lower(core)).empty()) {
      slots.push_back(i);
    }
  }
  std::vector<std::string> out;
  if (slots.empty()) return {text};
  for (std::size_t d = 0; d < diversity; ++d) {
    auto rewritten = tokens;
    // Variant d picks synonym (d + slot offset) at each slot, so successive
    // variants disagree on at least one slot whenever a slot has >1 synonym.
    for (std::size_t s = 0; s < slots.size(); ++s) {
      auto parts = text::split_core(tokens[slots[s]]);
      const auto& syns = lexicon_->synonyms(text::to_lower(parts.core));
      rewritten[slots[s]] = parts.prefix + syns[(d + s) % syns.size()] + parts.suffix;
    }
    out.push_back(text::join(rewritten));
  }
  return out;
}

}  // namespace emokit
