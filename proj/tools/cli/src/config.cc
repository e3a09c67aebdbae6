#include "emokit/cli/config.h"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "emokit/error.h"
#include "emokit/rng.h"
#include "emokit/taxonomy.h"

namespace emokit::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string_view to_string(Recipe recipe) {
  switch (recipe) {
    case Recipe::kFinetune: return "finetune";
    case Recipe::kAugmentThenFinetune: return "augment_then_finetune";
    case Recipe::kTransfer: return "transfer";
    case Recipe::kLowdataSweep: return "lowdata_sweep";
    case Recipe::kLlmEval: return "llm_eval";
  }
  return "finetune";
}

Recipe parse_recipe(std::string_view s) {
  for (Recipe r : {Recipe::kFinetune, Recipe::kAugmentThenFinetune,
                   Recipe::kTransfer, Recipe::kLowdataSweep, Recipe::kLlmEval}) {
    if (to_string(r) == s) return r;
  }
  throw UsageError("unknown recipe '" + std::string(s) + "'");
}

std::vector<std::string> recipe_names() {
  return {"finetune", "augment_then_finetune", "transfer", "lowdata_sweep",
          "llm_eval"};
}

namespace {

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_absolute() || base.empty()) return path.lexically_normal();
  return (base / path).lexically_normal();
}

void read_path(const json& j, const char* key, const fs::path& base,
               std::optional<fs::path>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
  } else {
    out = resolve(base, j.at(key).get<std::string>());
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json path_json(const std::optional<fs::path>& p) {
  return p ? json(p->string()) : json(nullptr);
}

DataPaths parse_data(const json& j, const std::string& where, const fs::path& base) {
  check_keys(j, where, {"train", "dev", "test"});
  DataPaths d;
  read_path(j, "train", base, d.train);
  read_path(j, "dev", base, d.dev);
  read_path(j, "test", base, d.test);
  return d;
}

ojson data_json(const DataPaths& d) {
  ojson j;
  j["train"] = path_json(d.train);
  j["dev"] = path_json(d.dev);
  j["test"] = path_json(d.test);
  return j;
}

RunConfig parse_run(const json& j) { return RunConfig::from_json(j.dump()); }

ojson run_json(const RunConfig& c) { return ojson::parse(c.to_json()); }

StageSettings parse_stage(const json& j, const std::string& where,
                          const fs::path& base, const RunConfig& fallback) {
  check_keys(j, where, {"dataset", "taxonomy", "data", "run"});
  StageSettings s;
  s.run = fallback;
  read(j, "dataset", s.dataset_id);
  read(j, "taxonomy", s.taxonomy);
  if (s.dataset_id.empty()) s.dataset_id = s.taxonomy;
  if (j.contains("data")) s.data = parse_data(j.at("data"), where + ".data", base);
  if (j.contains("run")) s.run = parse_run(j.at("run"));
  return s;
}

ojson stage_json(const StageSettings& s) {
  ojson j;
  j["dataset"] = s.dataset_id;
  j["taxonomy"] = s.taxonomy;
  j["data"] = data_json(s.data);
  j["run"] = run_json(s.run);
  return j;
}

SplitSize parse_size(const json& j) {
  if (j.is_number_integer()) {
    const auto n = j.get<std::int64_t>();
    if (n < 1) throw ConfigError("sweep size must be positive");
    return SplitSize::count(static_cast<std::size_t>(n));
  }
  if (j.is_number()) return SplitSize::fraction(j.get<double>());
  if (j.is_string()) return SplitSize::parse(j.get<std::string>());
  throw ConfigError("sweep size must be a number or string");
}

ojson size_json(const SplitSize& s) {
  if (s.kind == SplitSize::Kind::kCount) return static_cast<std::size_t>(s.value);
  return s.value;
}

AugmentSettings parse_augment(const json& j, const fs::path& base) {
  check_keys(j, "augment",
             {"method", "variants_per_example", "scope", "minority_k", "op_probs",
              "change_rate", "p_insert", "top_k", "seed", "workers", "masked_lm",
              "paraphraser", "paraphrase_fixture", "synonyms", "stopwords"});
  AugmentSettings a;
  if (j.contains("method")) {
    a.policy.method = parse_augment_method(j.at("method").get<std::string>());
    if (a.policy.method == AugmentMethod::kContextual) {
      a.policy = AugmentationPolicy::contextual_defaults();
    }
  }
  read(j, "variants_per_example", a.policy.variants_per_example);
  if (j.contains("scope") && !j.at("scope").is_null()) {
    a.scope = j.at("scope").get<std::vector<std::string>>();
  } else if (j.contains("scope")) {
    a.scope.reset();
  }
  if (j.contains("minority_k") && !j.at("minority_k").is_null()) {
    a.minority_k = j.at("minority_k").get<std::size_t>();
  }
  if (j.contains("op_probs")) {
    const auto p = j.at("op_probs").get<std::vector<double>>();
    if (p.size() != 3) throw ConfigError("augment.op_probs needs 3 entries");
    a.policy.op_probs = {p[0], p[1], p[2]};
  }
  read(j, "change_rate", a.policy.change_rate);
  read(j, "p_insert", a.policy.p_insert);
  read(j, "top_k", a.policy.top_k);
  read(j, "seed", a.policy.seed);
  read(j, "workers", a.policy.workers);
  read(j, "masked_lm", a.masked_lm);
  read(j, "paraphraser", a.paraphraser);
  read_path(j, "paraphrase_fixture", base, a.paraphrase_fixture);
  read_path(j, "synonyms", base, a.synonyms);
  read_path(j, "stopwords", base, a.stopwords);
  return a;
}

ojson augment_json(const AugmentSettings& a) {
  ojson j;
  j["method"] = std::string(to_string(a.policy.method));
  j["variants_per_example"] = a.policy.variants_per_example;
  j["scope"] = a.scope ? json(*a.scope) : json(nullptr);
  j["minority_k"] = a.minority_k ? json(*a.minority_k) : json(nullptr);
  j["op_probs"] = std::vector<double>(a.policy.op_probs.begin(), a.policy.op_probs.end());
  j["change_rate"] = a.policy.change_rate;
  j["p_insert"] = a.policy.p_insert;
  j["top_k"] = a.policy.top_k;
  j["seed"] = a.policy.seed;
  j["workers"] = a.policy.workers;
  j["masked_lm"] = a.masked_lm;
  j["paraphraser"] = a.paraphraser;
  j["paraphrase_fixture"] = path_json(a.paraphrase_fixture);
  j["synonyms"] = path_json(a.synonyms);
  j["stopwords"] = path_json(a.stopwords);
  return j;
}

void require_file(const std::optional<fs::path>& p, const std::string& what) {
  if (!p) throw ConfigError(what + " is not set");
  if (!fs::is_regular_file(*p)) {
    throw ConfigError(what + " does not exist: " + p->string());
  }
}

void check_optional_file(const std::optional<fs::path>& p, const std::string& what) {
  if (p && !fs::is_regular_file(*p)) {
    throw ConfigError(what + " does not exist: " + p->string());
  }
}

void require_taxonomy(const std::string& name) {
  try {
    builtin_space(name);
  } catch (const UnknownTaxonomy& e) {
    throw ConfigError(e.what());
  }
}

void validate_stage(const StageSettings& s, const std::string& where) {
  require_taxonomy(s.taxonomy);
  require_file(s.data.train, where + ".data.train");
  require_file(s.data.dev, where + ".data.dev");
  check_optional_file(s.data.test, where + ".data.test");
  s.run.validate();
}

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text,
                                         const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    const json j = json::parse(text, nullptr, true, true);
    check_keys(j, "config",
               {"taxonomy", "data", "output_dir", "encoder", "run", "augment",
                "transfer", "sweep", "llm"});
    read(j, "taxonomy", c.taxonomy);
    if (j.contains("data")) c.data = parse_data(j.at("data"), "data", base_dir);
    if (j.contains("output_dir")) {
      c.output_dir = resolve(base_dir, j.at("output_dir").get<std::string>());
    } else {
      c.output_dir = resolve(base_dir, c.output_dir.string());
    }
    if (j.contains("encoder")) {
      const auto& e = j.at("encoder");
      check_keys(e, "encoder", {"id", "buckets", "width", "init_scale", "seed"});
      read(e, "id", c.encoder.id);
      read(e, "buckets", c.encoder.tiny.buckets);
      read(e, "width", c.encoder.tiny.width);
      read(e, "init_scale", c.encoder.tiny.init_scale);
      read(e, "seed", c.encoder.tiny.seed);
    }
    if (j.contains("run")) c.run = parse_run(j.at("run"));
    if (j.contains("augment")) c.augment = parse_augment(j.at("augment"), base_dir);
    if (j.contains("transfer") && !j.at("transfer").is_null()) {
      const auto& t = j.at("transfer");
      check_keys(t, "transfer", {"stage1", "stage2", "head_policy"});
      TransferSettings ts;
      if (!t.contains("stage1") || !t.contains("stage2")) {
        throw ConfigError("transfer needs stage1 and stage2");
      }
      ts.stage1 = parse_stage(t.at("stage1"), "transfer.stage1", base_dir, c.run);
      ts.stage2 = parse_stage(t.at("stage2"), "transfer.stage2", base_dir, c.run);
      if (t.contains("head_policy")) {
        ts.head_policy = parse_head_policy(t.at("head_policy").get<std::string>());
      }
      c.transfer = ts;
    }
    if (j.contains("sweep") && !j.at("sweep").is_null()) {
      const auto& s = j.at("sweep");
      check_keys(s, "sweep",
                 {"source", "target_taxonomy", "target", "sizes", "repeats", "seed",
                  "workers", "run", "head_policy"});
      SweepSettings ss;
      ss.run = c.run;
      if (!s.contains("source")) throw ConfigError("sweep needs a source stage");
      ss.source = parse_stage(s.at("source"), "sweep.source", base_dir, c.run);
      read(s, "target_taxonomy", ss.target_taxonomy);
      read_path(s, "target", base_dir, ss.target);
      if (s.contains("sizes")) {
        ss.sizes.clear();
        for (const auto& v : s.at("sizes")) ss.sizes.push_back(parse_size(v));
      }
      read(s, "repeats", ss.repeats);
      read(s, "seed", ss.seed);
      read(s, "workers", ss.workers);
      if (s.contains("run")) ss.run = parse_run(s.at("run"));
      if (s.contains("head_policy")) {
        ss.head_policy = parse_head_policy(s.at("head_policy").get<std::string>());
      }
      c.sweep = ss;
    }
    if (j.contains("llm")) {
      const auto& l = j.at("llm");
      check_keys(l, "llm",
                 {"endpoint", "path", "model", "credential_env", "input", "limit",
                  "batch_limit", "retries", "base_delay_ms", "in_flight",
                  "timeout_s", "replay"});
      read(l, "endpoint", c.llm.endpoint);
      read(l, "path", c.llm.path);
      read(l, "model", c.llm.model);
      read(l, "credential_env", c.llm.credential_env);
      read_path(l, "input", base_dir, c.llm.input);
      read(l, "limit", c.llm.limit);
      read(l, "batch_limit", c.llm.batch_limit);
      read(l, "retries", c.llm.retries);
      read(l, "base_delay_ms", c.llm.base_delay_ms);
      read(l, "in_flight", c.llm.in_flight);
      read(l, "timeout_s", c.llm.timeout_s);
      read_path(l, "replay", base_dir, c.llm.replay);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), fs::absolute(path).parent_path());
}

std::string ExperimentConfig::to_json() const {
  ojson j;
  j["taxonomy"] = taxonomy;
  j["data"] = data_json(data);
  j["output_dir"] = output_dir.string();
  j["encoder"] = {{"id", encoder.id},
                  {"buckets", encoder.tiny.buckets},
                  {"width", encoder.tiny.width},
                  {"init_scale", encoder.tiny.init_scale},
                  {"seed", encoder.tiny.seed}};
  j["run"] = run_json(run);
  j["augment"] = augment_json(augment);
  if (transfer) {
    j["transfer"] = {{"stage1", stage_json(transfer->stage1)},
                     {"stage2", stage_json(transfer->stage2)},
                     {"head_policy", std::string(emokit::to_string(transfer->head_policy))}};
  } else {
    j["transfer"] = nullptr;
  }
  if (sweep) {
    ojson s;
    s["source"] = stage_json(sweep->source);
    s["target_taxonomy"] = sweep->target_taxonomy;
    s["target"] = path_json(sweep->target);
    s["sizes"] = ojson::array();
    for (const auto& size : sweep->sizes) s["sizes"].push_back(size_json(size));
    s["repeats"] = sweep->repeats;
    s["seed"] = sweep->seed;
    s["workers"] = sweep->workers;
    s["run"] = run_json(sweep->run);
    s["head_policy"] = std::string(emokit::to_string(sweep->head_policy));
    j["sweep"] = s;
  } else {
    j["sweep"] = nullptr;
  }
  j["llm"] = {{"endpoint", llm.endpoint},
              {"path", llm.path},
              {"model", llm.model},
              {"credential_env", llm.credential_env},
              {"input", path_json(llm.input)},
              {"limit", llm.limit},
              {"batch_limit", llm.batch_limit},
              {"retries", llm.retries},
              {"base_delay_ms", llm.base_delay_ms},
              {"in_flight", llm.in_flight},
              {"timeout_s", llm.timeout_s},
              {"replay", path_json(llm.replay)}};
  return j.dump(2);
}

std::string ExperimentConfig::hash() const {
  const std::uint64_t h = fnv1a64(to_json());
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

void ExperimentConfig::validate(Recipe recipe) const {
  if (encoder.tiny.buckets == 0 || encoder.tiny.width == 0) {
    throw ConfigError("encoder.buckets and encoder.width must be positive");
  }
  const auto ids = encoder_ids();
  if (std::find(ids.begin(), ids.end(), encoder.id) == ids.end()) {
    throw ConfigError("unknown encoder '" + encoder.id + "'");
  }
  switch (recipe) {
    case Recipe::kAugmentThenFinetune:
      augment.policy.validate();
      if (augment.paraphraser == "fixture") {
        require_file(augment.paraphrase_fixture, "augment.paraphrase_fixture");
      }
      check_optional_file(augment.synonyms, "augment.synonyms");
      check_optional_file(augment.stopwords, "augment.stopwords");
      [[fallthrough]];
    case Recipe::kFinetune:
      validate_stage({taxonomy, taxonomy, data, run}, "config");
      break;
    case Recipe::kTransfer:
      if (!transfer) throw ConfigError("the transfer recipe needs a 'transfer' section");
      validate_stage(transfer->stage1, "transfer.stage1");
      validate_stage(transfer->stage2, "transfer.stage2");
      break;
    case Recipe::kLowdataSweep:
      if (!sweep) throw ConfigError("the lowdata_sweep recipe needs a 'sweep' section");
      validate_stage(sweep->source, "sweep.source");
      require_taxonomy(sweep->target_taxonomy);
      require_file(sweep->target, "sweep.target");
      if (sweep->sizes.empty()) throw ConfigError("sweep.sizes is empty");
      if (sweep->repeats == 0) throw ConfigError("sweep.repeats must be positive");
      sweep->run.validate();
      break;
    case Recipe::kLlmEval:
      require_file(llm.input, "llm.input");
      check_optional_file(llm.replay, "llm.replay");
      if (llm.batch_limit == 0) throw ConfigError("llm.batch_limit must be positive");
      if (llm.retries < 0) throw ConfigError("llm.retries must be >= 0");
      if (llm.in_flight == 0) throw ConfigError("llm.in_flight must be positive");
      break;
  }
  std::error_code ec;
  fs::create_directories(output_dir, ec);
  const fs::path probe = output_dir / ".write_probe";
  {
    std::ofstream out(probe);
    if (ec || !out) {
      throw ConfigError("output directory is not writable: " + output_dir.string());
    }
  }
  fs::remove(probe, ec);
}

}  // namespace emokit::cli
