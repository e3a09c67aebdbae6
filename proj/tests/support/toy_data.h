#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "emokit/corpus.h"
#include "emokit/rng.h"
#include "emokit/taxonomy.h"
#include "emokit/text.h"

namespace emokit::testing {

inline LabelSpace toy_space() {
  return LabelSpace("toy", {"anger", "joy", "fear", "sadness"});
}

// Each class owns ten cue words; every sentence mixes cue words of its class
// with shared filler, so the classes are linearly separable in bag-of-words
// space.
inline Dataset toy_dataset(const LabelSpace& space, std::size_t n, std::uint64_t seed,
                           Split split = Split::kTrain, const std::string& prefix = "t") {
  static const std::vector<std::string> filler = {
      "the", "a", "today", "really", "just", "so", "very", "and", "it", "was"};
  Rng rng(seed);
  Dataset ds(space, split);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = i % space.size();
    std::vector<std::string> words;
    const std::size_t cues = 2 + rng.next_below(3);
    const std::size_t noise = 1 + rng.next_below(4);
    for (std::size_t k = 0; k < cues; ++k) {
      words.push_back(space.label(label) + "cue" + std::to_string(rng.next_below(10)));
    }
    for (std::size_t k = 0; k < noise; ++k) {
      words.push_back(filler[rng.next_below(filler.size())]);
    }
    for (std::size_t k = words.size(); k > 1; --k) {
      std::swap(words[k - 1], words[rng.next_below(k)]);
    }
    ds.add({prefix + std::to_string(i), text::join(words, " "), {label}, {}});
  }
  return ds;
}

// Random multi-label records over `space` with natural-looking sentences.
inline Dataset random_dataset(const LabelSpace& space, std::size_t n, std::uint64_t seed,
                              std::size_t max_labels = 3) {
  static const std::vector<std::string> vocab = {
      "i",     "really", "love",  "this",  "movie", "so",    "much",  "but",
      "the",   "ending", "was",   "sad",   "happy", "good",  "bad",   "angry",
      "great", "day",    "feel",  "scared", "it",   "is",    "a",     "thing",
      "you",   "made",   "me",    "laugh", "cry",   "today", "friend", "big"};
  Rng rng(seed);
  Dataset ds(space, Split::kTrain);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 1 + rng.next_below(20);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < len; ++k) words.push_back(vocab[rng.next_below(vocab.size())]);
    if (rng.next_unit() < 0.3) words.back() += "!";
    LabelSet labels;
    const std::size_t count = 1 + rng.next_below(max_labels);
    for (std::size_t k = 0; k < count; ++k) labels.insert(rng.next_below(space.size()));
    ds.add({"r" + std::to_string(i), text::join(words, " "), labels, {}});
  }
  return ds;
}

}  // namespace emokit::testing
