#include "emokit/encoder.h"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "emokit/error.h"
#include "emokit/rng.h"
#include "emokit/text.h"

namespace emokit {
namespace {

constexpr char kMagic[4] = {'E', 'M', 'K', 'T'};

struct TinyTape : EncoderTape {
  std::vector<std::vector<std::size_t>> buckets;
  Matrix pooled;
};

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

}  // namespace

std::uint64_t EncoderBackend::weight_hash() {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParamRef& p : parameters()) {
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(p.values.data()),
                                 p.values.size_bytes()),
                h);
  }
  return h;
}

TinyEncoder::TinyEncoder(const TinyEncoderOptions& options)
    : options_(options),
      embeddings_(options.buckets, options.width),
      grads_(options.buckets, options.width) {
  if (options.buckets == 0 || options.width == 0 || options.max_seq_len == 0) {
    throw ConfigError("tiny encoder needs nonzero buckets, width and max_seq_len");
  }
  Rng rng(options.seed);
  for (double& w : embeddings_.data()) w = options.init_scale * rng.next_gaussian();
}

std::vector<std::size_t> TinyEncoder::token_buckets(const std::string& s) const {
  std::vector<std::size_t> out;
  for (const auto& token : text::tokenize(s)) {
    if (out.size() == options_.max_seq_len) break;
    std::string core = text::to_lower(text::split_core(token).core);
    if (core.empty()) core = token;  // pure punctuation such as "!!"
    out.push_back(static_cast<std::size_t>(fnv1a64(core) % options_.buckets));
  }
  return out;
}

Matrix TinyEncoder::encode(std::span<const std::string> texts,
                           std::unique_ptr<EncoderTape>* tape) const {
  const std::size_t width = options_.width;
  Matrix pooled(texts.size(), width);
  auto record = std::make_unique<TinyTape>();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    auto buckets = token_buckets(texts[i]);
    auto row = pooled.row(i);
    if (!buckets.empty()) {
      for (std::size_t b : buckets) {
        const auto e = embeddings_.row(b);
        for (std::size_t k = 0; k < width; ++k) row[k] += e[k];
      }
      const double inv = 1.0 / double(buckets.size());
      for (double& v : row) v = std::tanh(v * inv);
    }
    if (tape) record->buckets.push_back(std::move(buckets));
  }
  if (tape) {
    record->pooled = pooled;
    *tape = std::move(record);
  }
  return pooled;
}

void TinyEncoder::backward(const EncoderTape& tape, const Matrix& grad_pooled) {
  const auto& t = dynamic_cast<const TinyTape&>(tape);
  const std::size_t width = options_.width;
  std::vector<double> grad_mean(width);
  for (std::size_t i = 0; i < t.buckets.size(); ++i) {
    const auto& buckets = t.buckets[i];
    if (buckets.empty()) continue;
    const auto pooled = t.pooled.row(i);
    const auto g = grad_pooled.row(i);
    const double inv = 1.0 / double(buckets.size());
    for (std::size_t k = 0; k < width; ++k) {
      grad_mean[k] = g[k] * (1.0 - pooled[k] * pooled[k]) * inv;
    }
    for (std::size_t b : buckets) {
      auto row = grads_.row(b);
      for (std::size_t k = 0; k < width; ++k) row[k] += grad_mean[k];
    }
  }
}

std::vector<ParamRef> TinyEncoder::parameters() {
  return {{"encoder.embeddings", embeddings_.data(), grads_.data()}};
}

void TinyEncoder::zero_grad() { grads_.fill(0.0); }

std::unique_ptr<EncoderBackend> TinyEncoder::clone() const {
  return std::make_unique<TinyEncoder>(*this);
}

void TinyEncoder::save(std::ostream& out) const {
  out.write(kMagic, sizeof kMagic);
  write_u64(out, options_.buckets);
  write_u64(out, options_.width);
  write_u64(out, options_.max_seq_len);
  out.write(reinterpret_cast<const char*>(embeddings_.data().data()),
            static_cast<std::streamsize>(embeddings_.data().size() * sizeof(double)));
}

void TinyEncoder::load(std::istream& in) {
  char magic[4] = {};
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) {
    throw BackendError("not a tiny-encoder weight file");
  }
  const auto buckets = read_u64(in);
  const auto width = read_u64(in);
  const auto max_len = read_u64(in);
  if (buckets != options_.buckets || width != options_.width) {
    throw BackendError("tiny-encoder weight file has shape " +
                       std::to_string(buckets) + "x" + std::to_string(width));
  }
  options_.max_seq_len = max_len;
  in.read(reinterpret_cast<char*>(embeddings_.data().data()),
          static_cast<std::streamsize>(embeddings_.data().size() * sizeof(double)));
  if (!in) throw BackendError("truncated tiny-encoder weight file");
}

std::vector<std::string> encoder_ids() {
  return {"tiny", "bert-base-cased", "roberta-base"};
}

std::unique_ptr<EncoderBackend> make_encoder(const std::string& id,
                                             const TinyEncoderOptions& options) {
  if (id == "tiny") return std::make_unique<TinyEncoder>(options);
  if (id == "bert-base-cased" || id == "roberta-base") {
    throw BackendError("encoder '" + id +
                       "' needs pretrained weights, which this build does not "
                       "bundle; use 'tiny' or plug in an adapter");
  }
  throw ConfigError("unknown encoder '" + id + "'");
}

}  // namespace emokit
