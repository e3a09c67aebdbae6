#include "emokit/transfer.h"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "emokit/error.h"

namespace emokit {
namespace {

void apply_head_policy(Classifier& model, HeadPolicy policy,
                       const LabelSpace& space, ProblemKind kind,
                       std::uint64_t seed, bool* reinitialized) {
  if (policy == HeadPolicy::kReinitialize) {
    model.reset_head(space, kind, seed);
    if (reinitialized) *reinitialized = true;
    return;
  }
  bool any_match = false;
  for (const auto& label : space.labels()) {
    if (model.space().find(label)) any_match = true;
  }
  model.remap_head(space, kind, seed);
  if (reinitialized) *reinitialized = !any_match;
}

}  // namespace

std::string_view to_string(HeadPolicy policy) {
  return policy == HeadPolicy::kReinitialize ? "reinitialize"
                                             : "map_when_spaces_match";
}

HeadPolicy parse_head_policy(std::string_view s) {
  if (s == "reinitialize") return HeadPolicy::kReinitialize;
  if (s == "map_when_spaces_match") return HeadPolicy::kMapWhenSpacesMatch;
  throw ConfigError("unknown head policy '" + std::string(s) + "'");
}

std::string StageReport::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset_id;
  j["best_epoch"] = best_epoch;
  j["encoder_hash_start"] = encoder_hash_start;
  j["encoder_hash_end"] = encoder_hash_end;
  j["head_reinitialized"] = head_reinitialized;
  auto& epochs = j["epochs"] = nlohmann::ordered_json::array();
  for (const auto& m : metas) epochs.push_back(nlohmann::ordered_json::parse(m.to_json()));
  return j.dump(2);
}

void validate_plan(const TransferPlan& plan, const DatasetCatalog& catalog) {
  for (const StagePlan* stage : {&plan.stage1, &plan.stage2}) {
    if (!catalog.count(stage->dataset_id)) {
      throw ConfigError("transfer plan names unknown dataset '" +
                        stage->dataset_id + "'");
    }
    stage->config.validate();
  }
}

TransferResult run_transfer(const TransferPlan& plan,
                            const DatasetCatalog& catalog,
                            const EncoderBackend& backend,
                            const std::optional<std::filesystem::path>& output_dir) {
  validate_plan(plan, catalog);
  auto persist = [&](const StageReport& report, const char* name) {
    if (!output_dir) return;
    std::filesystem::create_directories(*output_dir);
    std::ofstream out(*output_dir / name);
    out << report.to_json() << '\n';
  };
  auto checkpoint_options = [&](const char* stage) {
    FitOptions options;
    if (output_dir) options.checkpoint_root = *output_dir / stage;
    return options;
  };

  const auto& data1 = catalog.at(plan.stage1.dataset_id);
  const RunConfig& cfg1 = plan.stage1.config;
  Classifier model(backend.clone(), data1.train.space(), cfg1.problem_kind,
                   derive_seed(cfg1.seed, "head"));
  StageReport stage1;
  stage1.dataset_id = plan.stage1.dataset_id;
  stage1.encoder_hash_start = model.encoder().weight_hash();
  stage1.head_reinitialized = true;
  FitResult r1 = fit(std::move(model), data1.train, data1.dev, cfg1,
                     checkpoint_options("stage1"));
  stage1.metas = r1.metas;
  stage1.best_epoch = r1.best_epoch;
  stage1.encoder_hash_end = r1.model.encoder().weight_hash();
  persist(stage1, "stage1.json");

  const auto& data2 = catalog.at(plan.stage2.dataset_id);
  const RunConfig& cfg2 = plan.stage2.config;
  Classifier carried = std::move(r1.model);
  StageReport stage2;
  stage2.dataset_id = plan.stage2.dataset_id;
  apply_head_policy(carried, plan.head_policy, data2.train.space(),
                    cfg2.problem_kind, derive_seed(cfg2.seed, "head"),
                    &stage2.head_reinitialized);
  stage2.encoder_hash_start = carried.encoder().weight_hash();
  FitResult r2 = fit(std::move(carried), data2.train, data2.dev, cfg2,
                     checkpoint_options("stage2"));
  stage2.metas = r2.metas;
  stage2.best_epoch = r2.best_epoch;
  stage2.encoder_hash_end = r2.model.encoder().weight_hash();
  persist(stage2, "stage2.json");

  return {std::move(r2.model), std::move(stage1), std::move(stage2)};
}

std::pair<double, double> confidence_interval(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sample_std = std::sqrt(ss / double(values.size() - 1));
  return {mean, 1.96 * sample_std / std::sqrt(double(values.size()))};
}

SweepReport run_lowdata_sweep(const Classifier& source, const Dataset& target,
                              const std::vector<SplitSize>& sizes,
                              std::size_t repeats, const RunConfig& config,
                              std::uint64_t seed, const SweepOptions& options) {
  config.validate();
  const auto partitions = random_splits(target, sizes, repeats, seed);
  SweepReport report;
  report.rows.resize(partitions.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= partitions.size()) return;
      try {
        const Partition& p = partitions[i];
        RunConfig run_config = config;
        run_config.seed = derive_seed(seed, i);
        Classifier model = source;
        apply_head_policy(model, options.head_policy, target.space(),
                          run_config.problem_kind,
                          derive_seed(run_config.seed, "head"), nullptr);
        const Dataset train = target.subset(p.train);
        const Dataset test = target.subset(p.test);
        const Dataset no_dev(target.space(), Split::kDev);
        FitResult fitted = fit(std::move(model), train, no_dev, run_config);
        const MetricsReport r = evaluate(fitted.model, test, run_config);
        report.rows[i] = {sizes[p.size_index], p.repeat, train.size(),
                          r.micro.f1, r.macro.f1};
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(partitions.size());
      }
    }
  };
  const std::size_t workers =
      std::max<std::size_t>(1, std::min(options.workers, partitions.size()));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    std::vector<double> micro, macro;
    for (const auto& p : partitions) {
      if (p.size_index != si) continue;
      const auto& row = report.rows[&p - partitions.data()];
      micro.push_back(row.micro_f1);
      macro.push_back(row.macro_f1);
    }
    SweepSummary s;
    s.size = sizes[si];
    s.runs = micro.size();
    std::tie(s.micro_mean, s.micro_half_width) = confidence_interval(micro);
    std::tie(s.macro_mean, s.macro_half_width) = confidence_interval(macro);
    s.degenerate = s.runs < 2;
    report.summary.push_back(s);
  }
  return report;
}

void write_sweep_rows(std::ostream& out, const SweepReport& report) {
  out << "size\trepeat\tmicro_f1\tmacro_f1\n";
  for (const auto& r : report.rows) {
    out << r.size.to_string() << '\t' << r.repeat << '\t' << std::fixed
        << std::setprecision(6) << r.micro_f1 << '\t' << r.macro_f1 << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void write_sweep_summary(std::ostream& out, const SweepReport& report) {
  out << "# interval: mean +/- 1.96 * sample_std / sqrt(runs); "
         "degenerate when runs < 2\n";
  out << "size\truns\tmicro_mean\tmicro_ci_low\tmicro_ci_high\tmacro_mean\t"
         "macro_ci_low\tmacro_ci_high\tflags\n";
  for (const auto& s : report.summary) {
    out << s.size.to_string() << '\t' << s.runs << '\t' << std::fixed
        << std::setprecision(6) << s.micro_mean << '\t'
        << s.micro_mean - s.micro_half_width << '\t'
        << s.micro_mean + s.micro_half_width << '\t' << s.macro_mean << '\t'
        << s.macro_mean - s.macro_half_width << '\t'
        << s.macro_mean + s.macro_half_width << '\t'
        << (s.degenerate ? "degenerate" : "-") << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

}  // namespace emokit
