#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "emokit/tensor.h"

namespace emokit {

// Per-batch state kept between forward and backward.
struct EncoderTape {
  virtual ~EncoderTape() = default;
};

// A text encoder producing fixed-width pooled representations.
class EncoderBackend {
 public:
  virtual ~EncoderBackend() = default;

  virtual std::string id() const = 0;
  virtual std::size_t width() const = 0;

  // Pooled representations, one row per text. When `tape` is non-null it
  // receives what backward() needs.
  virtual Matrix encode(std::span<const std::string> texts,
                        std::unique_ptr<EncoderTape>* tape) const = 0;

  // Accumulates parameter gradients given d(loss)/d(pooled).
  virtual void backward(const EncoderTape& tape, const Matrix& grad_pooled) = 0;

  virtual std::vector<ParamRef> parameters() = 0;
  virtual void zero_grad() = 0;

  virtual std::unique_ptr<EncoderBackend> clone() const = 0;

  // Backend-native weight serialization.
  virtual void save(std::ostream& out) const = 0;
  virtual void load(std::istream& in) = 0;

  // FNV-1a over the raw parameter bytes.
  std::uint64_t weight_hash();
};

struct TinyEncoderOptions {
  std::size_t buckets = 4096;
  std::size_t width = 32;
  std::size_t max_seq_len = 64;
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

// Randomly initialised hashed bag-of-words encoder:
//   pooled = tanh(mean over tokens of E[bucket(token)])
// Tokens are lowercased whitespace tokens with edge punctuation stripped,
// truncated to max_seq_len, and hashed with FNV-1a into `buckets` rows.
// Texts with no tokens pool to zero.
class TinyEncoder final : public EncoderBackend {
 public:
  explicit TinyEncoder(const TinyEncoderOptions& options);

  std::string id() const override { return "tiny"; }
  std::size_t width() const override { return options_.width; }

  Matrix encode(std::span<const std::string> texts,
                std::unique_ptr<EncoderTape>* tape) const override;
  void backward(const EncoderTape& tape, const Matrix& grad_pooled) override;

  std::vector<ParamRef> parameters() override;
  void zero_grad() override;
  std::unique_ptr<EncoderBackend> clone() const override;

  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const TinyEncoderOptions& options() const noexcept { return options_; }

  std::vector<std::size_t> token_buckets(const std::string& text) const;

 private:
  TinyEncoderOptions options_;
  Matrix embeddings_;
  Matrix grads_;
};

// Encoder ids accepted by make_encoder().
std::vector<std::string> encoder_ids();

// "tiny" builds a TinyEncoder. The pretrained ids ("bert-base-cased",
// "roberta-base") are recognised but need externally supplied weights, which
// this build cannot load; they raise BackendError. Unknown ids raise
// ConfigError.
std::unique_ptr<EncoderBackend> make_encoder(const std::string& id,
                                             const TinyEncoderOptions& options);

}  // namespace emokit
