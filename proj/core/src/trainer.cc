#include "emokit/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "emokit/error.h"
#include "emokit/text.h"

namespace emokit {
namespace {

double sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

std::vector<double> softmax(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::string truncate_tokens(const std::string& s, std::size_t max_len) {
  auto tokens = text::tokenize(s);
  if (tokens.size() <= max_len) return s;
  tokens.resize(max_len);
  return text::join(tokens);
}

std::vector<std::string> prepared_texts(const Dataset& d, std::size_t max_len) {
  std::vector<std::string> out;
  out.reserve(d.size());
  for (const auto& r : d.records()) out.push_back(truncate_tokens(r.text, max_len));
  return out;
}

std::string metric_key(SelectionMetric m) { return std::string(to_string(m)); }

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << body;
}

}  // namespace

std::string_view to_string(ProblemKind kind) {
  return kind == ProblemKind::kMultiLabel ? "multi_label" : "single_label";
}
std::string_view to_string(Scheduler s) {
  return s == Scheduler::kNone ? "none" : "linear_warmup";
}
std::string_view to_string(SelectionMetric m) {
  return m == SelectionMetric::kMacroF1 ? "macro_f1" : "micro_f1";
}

ProblemKind parse_problem_kind(std::string_view s) {
  if (s == "multi_label") return ProblemKind::kMultiLabel;
  if (s == "single_label") return ProblemKind::kSingleLabel;
  throw ConfigError("unknown problem kind '" + std::string(s) + "'");
}
Scheduler parse_scheduler(std::string_view s) {
  if (s == "none") return Scheduler::kNone;
  if (s == "linear_warmup") return Scheduler::kLinearWarmup;
  throw ConfigError("unknown scheduler '" + std::string(s) + "'");
}
SelectionMetric parse_selection_metric(std::string_view s) {
  if (s == "macro_f1") return SelectionMetric::kMacroF1;
  if (s == "micro_f1") return SelectionMetric::kMicroF1;
  throw ConfigError("unknown selection metric '" + std::string(s) + "'");
}

void RunConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a nonnegative number");
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("threshold must lie in (0, 1)");
  }
  if (max_seq_len == 0) throw ConfigError("max_seq_len must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("AdamW betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
}

std::string RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["weight_decay"] = weight_decay;
  j["warmup_steps"] = warmup_steps;
  j["seed"] = seed;
  j["scheduler"] = to_string(scheduler);
  j["problem_kind"] = to_string(problem_kind);
  j["threshold"] = threshold;
  j["selection_metric"] = to_string(selection_metric);
  j["max_seq_len"] = max_seq_len;
  j["beta1"] = beta1;
  j["beta2"] = beta2;
  j["epsilon"] = epsilon;
  return j.dump();
}

RunConfig RunConfig::from_json(const std::string& json) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  RunConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "scheduler") c.scheduler = parse_scheduler(value.get<std::string>());
      else if (key == "problem_kind") c.problem_kind = parse_problem_kind(value.get<std::string>());
      else if (key == "threshold") c.threshold = value.get<double>();
      else if (key == "selection_metric") c.selection_metric = parse_selection_metric(value.get<std::string>());
      else if (key == "max_seq_len") c.max_seq_len = value.get<std::size_t>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "epsilon") c.epsilon = value.get<double>();
      else throw ConfigError("run config: unknown key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("run config: ") + e.what());
  }
  return c;
}

std::string RunConfig::hash() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(to_json());
  return out.str();
}

double CheckpointMeta::mean_train_loss() const {
  if (train_loss_curve.empty()) return 0.0;
  return std::accumulate(train_loss_curve.begin(), train_loss_curve.end(), 0.0) /
         double(train_loss_curve.size());
}

std::string CheckpointMeta::to_json() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["config_hash"] = config_hash;
  j["dev_metrics"] = dev_metrics;
  j["train_loss_curve"] = train_loss_curve;
  return j.dump(2);
}

CheckpointMeta CheckpointMeta::from_json(const std::string& json) {
  const auto j = nlohmann::json::parse(json);
  CheckpointMeta m;
  m.epoch = j.at("epoch").get<std::size_t>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.dev_metrics = j.at("dev_metrics").get<std::map<std::string, double>>();
  m.train_loss_curve = j.at("train_loss_curve").get<std::vector<double>>();
  return m;
}

ClassifierHead::ClassifierHead(std::size_t labels, std::size_t width)
    : weights(labels, width), bias(labels, 0.0), weight_grads(labels, width),
      bias_grads(labels, 0.0) {}

void ClassifierHead::reinitialize(Rng& rng, double scale) {
  for (double& w : weights.data()) w = scale * rng.next_gaussian();
  std::fill(bias.begin(), bias.end(), 0.0);
  zero_grad();
}

Matrix ClassifierHead::logits(const Matrix& pooled) const {
  Matrix out(pooled.rows(), weights.rows());
  for (std::size_t i = 0; i < pooled.rows(); ++i) {
    const auto x = pooled.row(i);
    for (std::size_t l = 0; l < weights.rows(); ++l) {
      const auto w = weights.row(l);
      double z = bias[l];
      for (std::size_t k = 0; k < x.size(); ++k) z += w[k] * x[k];
      out(i, l) = z;
    }
  }
  return out;
}

void ClassifierHead::zero_grad() {
  weight_grads.fill(0.0);
  std::fill(bias_grads.begin(), bias_grads.end(), 0.0);
}

Classifier::Classifier(std::unique_ptr<EncoderBackend> encoder, LabelSpace space,
                       ProblemKind kind, std::uint64_t head_seed)
    : encoder_(std::move(encoder)), space_(std::move(space)), kind_(kind) {
  if (!encoder_) throw ConfigError("classifier needs an encoder");
  reset_head(space_, kind_, head_seed);
}

Classifier::Classifier(const Classifier& other)
    : encoder_(other.encoder_->clone()), space_(other.space_),
      kind_(other.kind_), head_(other.head_) {}

Classifier& Classifier::operator=(const Classifier& other) {
  if (this != &other) {
    encoder_ = other.encoder_->clone();
    space_ = other.space_;
    kind_ = other.kind_;
    head_ = other.head_;
  }
  return *this;
}

void Classifier::reset_head(LabelSpace space, ProblemKind kind, std::uint64_t seed) {
  space_ = std::move(space);
  kind_ = kind;
  head_ = ClassifierHead(space_.size(), encoder_->width());
  Rng rng(seed);
  head_.reinitialize(rng);
}

void Classifier::remap_head(LabelSpace space, ProblemKind kind, std::uint64_t seed) {
  const ClassifierHead old = head_;
  const LabelSpace old_space = space_;
  reset_head(std::move(space), kind, seed);
  for (std::size_t l = 0; l < space_.size(); ++l) {
    if (auto src = old_space.find(space_.label(l))) {
      const auto from = old.weights.row(*src);
      std::copy(from.begin(), from.end(), head_.weights.row(l).begin());
      head_.bias[l] = old.bias[*src];
    }
  }
}

Matrix Classifier::logits(std::span<const std::string> texts) const {
  return head_.logits(encoder_->encode(texts, nullptr));
}

double Classifier::batch_loss(std::span<const std::string> texts,
                              std::span<const LabelSet> gold, bool accumulate) {
  if (texts.size() != gold.size() || texts.empty()) {
    throw ShapeError("batch_loss needs matching, nonempty texts and labels");
  }
  std::unique_ptr<EncoderTape> tape;
  const Matrix pooled = encoder_->encode(texts, accumulate ? &tape : nullptr);
  const Matrix z = head_.logits(pooled);
  const std::size_t n = texts.size();
  const std::size_t labels = space_.size();
  Matrix dz(n, labels);
  double loss = 0.0;

  if (kind_ == ProblemKind::kMultiLabel) {
    const double scale = 1.0 / double(n * labels);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t l = 0; l < labels; ++l) {
        const double y = gold[i].count(l) ? 1.0 : 0.0;
        const double v = z(i, l);
        loss += std::max(v, 0.0) - v * y + std::log1p(std::exp(-std::abs(v)));
        dz(i, l) = (sigmoid(v) - y) * scale;
      }
    }
    loss *= scale;
  } else {
    const double scale = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto p = softmax(z.row(i));
      const double share = gold[i].empty() ? 0.0 : 1.0 / double(gold[i].size());
      for (std::size_t l = 0; l < labels; ++l) {
        const double y = gold[i].count(l) ? share : 0.0;
        if (y > 0.0) loss -= y * std::log(std::max(p[l], 1e-300));
        dz(i, l) = (p[l] - y) * scale;
      }
    }
    loss *= scale;
  }

  if (accumulate) {
    const std::size_t width = pooled.cols();
    Matrix grad_pooled(n, width);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = pooled.row(i);
      auto gp = grad_pooled.row(i);
      for (std::size_t l = 0; l < labels; ++l) {
        const double d = dz(i, l);
        if (d == 0.0) continue;
        auto gw = head_.weight_grads.row(l);
        const auto w = head_.weights.row(l);
        for (std::size_t k = 0; k < width; ++k) {
          gw[k] += d * x[k];
          gp[k] += d * w[k];
        }
        head_.bias_grads[l] += d;
      }
    }
    encoder_->backward(*tape, grad_pooled);
  }
  return loss;
}

void Classifier::zero_grad() {
  encoder_->zero_grad();
  head_.zero_grad();
}

std::vector<ParamRef> Classifier::parameters() {
  auto params = encoder_->parameters();
  params.push_back({"head.weights", head_.weights.data(), head_.weight_grads.data()});
  params.push_back({"head.bias", head_.bias, head_.bias_grads});
  return params;
}

void Classifier::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "encoder.bin", std::ios::binary);
    encoder_->save(out);
  }
  nlohmann::ordered_json j;
  j["encoder"] = encoder_->id();
  j["space"] = space_.name();
  j["labels"] = space_.labels();
  j["problem_kind"] = to_string(kind_);
  j["weights"] = head_.weights.data();
  j["bias"] = head_.bias;
  write_text_file(dir / "head.json", j.dump());
}

void Classifier::load(const std::filesystem::path& dir) {
  {
    std::ifstream in(dir / "encoder.bin", std::ios::binary);
    if (!in) throw ConfigError("missing " + (dir / "encoder.bin").string());
    encoder_->load(in);
  }
  std::ifstream in(dir / "head.json");
  if (!in) throw ConfigError("missing " + (dir / "head.json").string());
  const auto j = nlohmann::json::parse(in);
  LabelSpace space(j.at("space").get<std::string>(),
                   j.at("labels").get<std::vector<std::string>>());
  reset_head(space, parse_problem_kind(j.at("problem_kind").get<std::string>()), 0);
  const auto w = j.at("weights").get<std::vector<double>>();
  if (w.size() != head_.weights.data().size()) {
    throw ConfigError("head weights do not match encoder width");
  }
  head_.weights.data() = w;
  head_.bias = j.at("bias").get<std::vector<double>>();
}

void AdamW::step(std::vector<ParamRef> params, double learning_rate) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ShapeError("optimizer parameter set changed");
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, double(step_));
  const double c2 = 1.0 - std::pow(beta2_, double(step_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& m = m_[p];
    auto& v = v_[p];
    auto values = params[p].values;
    const auto grads = params[p].grads;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grads[i];
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      values[i] -= learning_rate *
                   (mhat / (std::sqrt(vhat) + epsilon_) + weight_decay_ * values[i]);
    }
  }
}

double scheduled_lr(const RunConfig& config, std::size_t step,
                    std::size_t total_steps) {
  if (config.scheduler == Scheduler::kNone) return config.learning_rate;
  if (step < config.warmup_steps) {
    return config.learning_rate * double(step) / double(config.warmup_steps);
  }
  const double span = double(std::max<std::size_t>(1, total_steps - std::min(total_steps, config.warmup_steps)));
  const double remaining = double(total_steps > step ? total_steps - step : 0);
  return config.learning_rate * std::max(0.0, remaining / span);
}

std::size_t select_best(const std::vector<CheckpointMeta>& metas,
                        SelectionMetric metric) {
  if (metas.empty()) throw ConfigError("select_best needs at least one checkpoint");
  const std::string key = metric_key(metric);
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < metas.size(); ++i) {
    auto it = metas[i].dev_metrics.find(key);
    if (it == metas[i].dev_metrics.end()) {
      throw ConfigError("checkpoint for epoch " + std::to_string(metas[i].epoch) +
                        " lacks metric " + key);
    }
    if (i == 0 || it->second > best_value) {
      best = i;
      best_value = it->second;
    }
  }
  return metas[best].epoch;
}

std::vector<std::vector<double>> predict(const Classifier& model,
                                         const std::vector<std::string>& texts,
                                         const RunConfig& config) {
  std::vector<std::string> prepared;
  prepared.reserve(texts.size());
  for (const auto& t : texts) prepared.push_back(truncate_tokens(t, config.max_seq_len));
  const Matrix z = model.logits(prepared);
  std::vector<std::vector<double>> out(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (config.problem_kind == ProblemKind::kMultiLabel) {
      for (double v : z.row(i)) out[i].push_back(sigmoid(v));
    } else {
      out[i] = softmax(z.row(i));
    }
  }
  return out;
}

LabelSet decide(std::span<const double> scores, const RunConfig& config) {
  if (scores.empty()) return {};
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[argmax]) argmax = i;
  }
  if (config.problem_kind == ProblemKind::kSingleLabel) return {argmax};
  LabelSet out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i] >= config.threshold) out.insert(out.end(), i);
  }
  if (out.empty()) out.insert(argmax);
  return out;
}

MetricsReport evaluate(const Classifier& model, const Dataset& dataset,
                       const RunConfig& config) {
  std::vector<std::string> texts;
  std::vector<LabelSet> gold;
  for (const auto& r : dataset.records()) {
    texts.push_back(r.text);
    gold.push_back(r.label_ids);
  }
  std::vector<LabelSet> pred;
  for (const auto& s : predict(model, texts, config)) pred.push_back(decide(s, config));
  return score(gold, pred, dataset.space());
}

FitResult fit(Classifier model, const Dataset& train, const Dataset& dev,
              const RunConfig& config, const FitOptions& options) {
  config.validate();
  if (train.empty()) throw ConfigError("training set is empty");
  if (!(train.space() == dev.space())) {
    throw SpaceMismatch("train space '" + train.space().name() +
                        "' differs from dev space '" + dev.space().name() + "'");
  }
  if (!(model.space() == train.space())) {
    throw SpaceMismatch("model head is for space '" + model.space().name() +
                        "', data uses '" + train.space().name() + "'");
  }
  if (model.problem_kind() != config.problem_kind) {
    model.reset_head(model.space(), config.problem_kind, derive_seed(config.seed, "head"));
  }

  const auto texts = prepared_texts(train, config.max_seq_len);
  std::vector<LabelSet> labels;
  for (const auto& r : train.records()) labels.push_back(r.label_ids);

  const std::size_t n = train.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const std::string config_hash = config.hash();

  std::optional<std::filesystem::path> run_dir;
  if (options.checkpoint_root) run_dir = *options.checkpoint_root / config_hash;

  AdamW optimizer(config.beta1, config.beta2, config.epsilon, config.weight_decay);
  std::vector<CheckpointMeta> metas;
  std::optional<Classifier> best_model;
  double best_value = 0.0;
  std::size_t best_epoch = 0;
  const std::string key = metric_key(config.selection_metric);

  std::vector<std::size_t> order(n);
  std::vector<std::string> batch_texts;
  std::vector<LabelSet> batch_labels;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);

    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.config_hash = config_hash;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      batch_texts.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < end; ++i) {
        batch_texts.push_back(texts[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      model.zero_grad();
      const double loss = model.batch_loss(batch_texts, batch_labels, true);
      optimizer.step(model.parameters(), scheduled_lr(config, step, total_steps));
      meta.train_loss_curve.push_back(loss);
      ++step;
    }

    bool improved = false;
    if (!dev.empty()) {
      const MetricsReport r = evaluate(model, dev, config);
      meta.dev_metrics = {{"macro_f1", r.macro.f1},
                          {"micro_f1", r.micro.f1},
                          {"macro_precision", r.macro.precision},
                          {"macro_recall", r.macro.recall},
                          {"subset_accuracy", r.subset_accuracy}};
      const double value = meta.dev_metrics.at(key);
      improved = !best_model || value > best_value;
      if (improved) best_value = value;
    } else {
      improved = true;  // no dev set: the latest epoch wins
    }
    meta.dev_metrics["train_loss"] = meta.mean_train_loss();
    if (improved) {
      best_model = model;
      best_epoch = epoch;
    }

    if (run_dir) {
      const auto dir = *run_dir / ("epoch_" + std::to_string(epoch));
      model.save(dir);
      write_text_file(dir / "meta.json", meta.to_json());
      std::ostringstream loss_out;
      write_loss_curve(loss_out, std::vector<CheckpointMeta>{meta},
                       step - meta.train_loss_curve.size() + 1);
      write_text_file(dir / "loss.tsv", loss_out.str());
      if (!options.keep_all_checkpoints) {
        for (std::size_t e = 1; e <= epoch; ++e) {
          if (e == best_epoch) continue;
          std::filesystem::remove_all(*run_dir / ("epoch_" + std::to_string(e)));
        }
      }
    }
    metas.push_back(std::move(meta));
  }

  if (run_dir) {
    std::ostringstream loss_out;
    write_loss_curve(loss_out, metas);
    write_text_file(*run_dir / "loss.tsv", loss_out.str());
    nlohmann::ordered_json j;
    j["config"] = nlohmann::json::parse(config.to_json());
    j["best_epoch"] = best_epoch;
    j["selection_metric"] = key;
    write_text_file(*run_dir / "run.json", j.dump(2));
  }
  return {std::move(*best_model), std::move(metas), best_epoch};
}

FitResult fit(const Dataset& train, const Dataset& dev, const RunConfig& config,
              const EncoderBackend& backend, const FitOptions& options) {
  Classifier model(backend.clone(), train.space(), config.problem_kind,
                   derive_seed(config.seed, "head"));
  return fit(std::move(model), train, dev, config, options);
}

void write_loss_curve(std::ostream& out, const std::vector<CheckpointMeta>& metas,
                      std::size_t first_step) {
  out << "step\tloss\n";
  std::size_t step = first_step;
  for (const auto& m : metas) {
    for (double loss : m.train_loss_curve) {
      out << step++ << '\t' << std::setprecision(10) << loss << '\n';
    }
  }
}

}  // namespace emokit
