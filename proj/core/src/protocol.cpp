#include "cite/protocol.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "cite/error.hpp"
#include "cite/sampling.hpp"

namespace cite {

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const SynthDataset& domain_at(const std::vector<SynthDataset>& domains, std::size_t d) {
  if (d >= domains.size()) fail(ErrorCode::kSpecDatasetMismatch, "domain " + std::to_string(d) + " not loaded");
  return domains[d];
}

void require_classes(const SynthDataset& ds, std::span<const std::size_t> classes) {
  for (std::size_t c : classes)
    if (c >= ds.n_classes) fail(ErrorCode::kSpecDatasetMismatch, "class " + std::to_string(c) + " not in dataset");
}

struct Score {
  std::size_t correct = 0;
  std::size_t total = 0;
  double percent() const { return total == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(total); }
};

}  // namespace

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::kFSL: return "fsl";
    case Protocol::kBNG: return "bng";
    case Protocol::kDG: return "dg";
    case Protocol::kCDG: return "cdg";
  }
  return "?";
}

Protocol parse_protocol(const std::string& text) {
  if (text == "fsl") return Protocol::kFSL;
  if (text == "bng") return Protocol::kBNG;
  if (text == "dg") return Protocol::kDG;
  if (text == "cdg") return Protocol::kCDG;
  fail(ErrorCode::kConfig, "unknown protocol '" + text + "' (expected fsl, bng, dg or cdg)");
}

void SplitSpec::validate() const {
  if (base_classes.empty()) fail(ErrorCode::kInvalidSpec, "split has no base classes");
  if (new_classes.empty()) fail(ErrorCode::kInvalidSpec, "split has no new classes");
  const std::set<std::size_t> base(base_classes.begin(), base_classes.end());
  const std::set<std::size_t> novel(new_classes.begin(), new_classes.end());
  if (base.size() != base_classes.size() || novel.size() != new_classes.size())
    fail(ErrorCode::kInvalidSpec, "duplicate class in split");
  switch (protocol) {
    case Protocol::kFSL:
    case Protocol::kDG:
      if (base != novel) fail(ErrorCode::kInvalidSpec, to_string(protocol) + " requires base == new");
      break;
    case Protocol::kBNG:
    case Protocol::kCDG:
      for (std::size_t c : base)
        if (novel.contains(c)) fail(ErrorCode::kInvalidSpec, to_string(protocol) + " requires disjoint base/new");
      break;
  }
  if (protocol == Protocol::kFSL && train_domain != test_domain)
    fail(ErrorCode::kInvalidSpec, "fsl tests on its training domain");
}

SplitSpec make_split_spec(Protocol protocol, const ClassSplit& split, std::size_t n_classes, std::size_t train_domain,
                          std::size_t test_domain) {
  SplitSpec spec;
  spec.protocol = protocol;
  spec.train_domain = train_domain;
  spec.test_domain = test_domain;
  if (protocol == Protocol::kFSL || protocol == Protocol::kDG) {
    for (std::size_t c = 0; c < n_classes; ++c) spec.base_classes.push_back(c);
    spec.new_classes = spec.base_classes;
  } else {
    spec.base_classes = split.base;
    spec.new_classes = split.novel;
  }
  spec.validate();
  return spec;
}

MetricsReport evaluate(const Checkpoint& model, const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                       const EvalOptions& opts) {
  spec.validate();
  const SynthDataset& ds = domain_at(domains, spec.test_domain);
  require_classes(ds, spec.base_classes);
  require_classes(ds, spec.new_classes);
  const Vocabulary vocab(ds.n_classes);
  const RowPartition part = train_test_rows(ds);

  std::map<std::size_t, Score> per_class;
  auto score_group = [&](std::span<const std::size_t> classes, bool is_base) {
    std::vector<std::size_t> candidates(classes.begin(), classes.end());
    if (opts.joint_candidates) {
      std::set<std::size_t> all(spec.base_classes.begin(), spec.base_classes.end());
      all.insert(spec.new_classes.begin(), spec.new_classes.end());
      candidates.assign(all.begin(), all.end());
    }
    std::vector<std::size_t> rows;
    for (std::size_t r : part.test)
      if (std::find(classes.begin(), classes.end(), ds.class_ids[r]) != classes.end()) rows.push_back(r);
    Matrix images(rows.size(), ds.features.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      auto src = ds.features.row(rows[i]);
      std::copy(src.begin(), src.end(), images.row(i).begin());
    }
    Classification cls;
    if (is_base && opts.use_classifier_for_base && !opts.joint_candidates) {
      cls = classify_with_classifier(model.model.image, model.classifier, spec.base_classes, images, opts.tau);
    } else {
      cls = classify(model.model, images, vocab.render_prompts(candidates), opts.tau);
    }
    Score total;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t truth = ds.class_ids[rows[i]];
      const bool ok = cls.predicted[i] == truth;
      per_class[truth].correct += ok ? 1 : 0;
      per_class[truth].total += 1;
      total.correct += ok ? 1 : 0;
      total.total += 1;
    }
    return total.percent();
  };

  MetricsReport report;
  report.protocol = spec.protocol;
  report.base_acc = score_group(spec.base_classes, true);
  if (spec.protocol == Protocol::kFSL || spec.protocol == Protocol::kDG) {
    report.new_acc = report.base_acc;
  } else {
    report.new_acc = score_group(spec.new_classes, false);
  }
  report.hm = harmonic_mean(report.base_acc, report.new_acc);
  for (const auto& [cls, s] : per_class) report.per_class[cls] = s.percent();
  return report;
}

TrainingSet build_training_set(const SplitSpec& spec, const std::vector<SynthDataset>& domains, std::size_t shots,
                               std::uint64_t seed) {
  spec.validate();
  const SynthDataset& ds = domain_at(domains, spec.train_domain);
  require_classes(ds, spec.base_classes);
  const RowPartition part = train_test_rows(ds);
  const auto rows = sample_fewshot(ds, part.train, shots, spec.base_classes, seed);
  return make_training_set(ds, rows, spec.base_classes, Vocabulary(ds.n_classes));
}

ProtocolOutcome run_protocol(const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                             const Checkpoint& pretrained, const TrainConfig& train_cfg,
                             const EnsembleConfig& ens_cfg, const EvalOptions& eval_opts) {
  const TrainingSet data = build_training_set(spec, domains, train_cfg.shots, train_cfg.seed);
  ProtocolOutcome out;
  out.zero_shot = with_classifier(pretrained, data.class_prompts);
  out.fine_tuned = finetune(out.zero_shot, data, train_cfg);
  const Checkpoint ensembled = interpolate_params(out.fine_tuned.checkpoint, out.zero_shot, ens_cfg);
  out.report = evaluate(ensembled, spec, domains, eval_opts);
  out.report.alpha = ens_cfg.alpha;
  out.report.seed = train_cfg.seed;
  return out;
}

std::vector<MetricsReport> alpha_sweep(const Checkpoint& fine_tuned, const Checkpoint& zero_shot,
                                       const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                                       std::span<const double> alphas, std::uint64_t seed,
                                       const EvalOptions& eval_opts) {
  std::vector<MetricsReport> out;
  for (double a : alphas) {
    if (!(a >= 0.0 && a <= 1.0)) fail(ErrorCode::kConfig, "alpha outside [0, 1]");
    MetricsReport r = evaluate(interpolate_params(fine_tuned, zero_shot, EnsembleConfig{a, true}), spec, domains, eval_opts);
    r.alpha = a;
    r.seed = seed;
    out.push_back(std::move(r));
  }
  return out;
}

double mean_vld_divergence(const DualEncoder& model, const DualEncoder& zero_shot, const SynthDataset& ds,
                           std::span<const std::size_t> rows, std::size_t batch_size, double tau,
                           std::uint64_t seed) {
  const Vocabulary vocab(ds.n_classes);
  double sum = 0.0;
  std::size_t batches = 0;
  for (const auto& batch : make_batches(rows.size(), std::min(batch_size, rows.size()), seed, 0)) {
    Matrix images(batch.size(), ds.features.cols());
    std::vector<PromptTokens> prompts;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto src = ds.features.row(rows[batch[i]]);
      std::copy(src.begin(), src.end(), images.row(i).begin());
      prompts.push_back(vocab.render_prompt(ds.class_ids[rows[batch[i]]]));
    }
    sum += vld_loss(encode_image(model.image, images), encode_text(model.text, prompts),
                    encode_image(zero_shot.image, images), encode_text(zero_shot.text, prompts), tau);
    ++batches;
  }
  return sum / static_cast<double>(batches);
}

void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports) {
  out << "protocol,alpha,B,N,HM,seed\n";
  for (const auto& r : reports) {
    out << to_string(r.protocol) << ',' << pct(r.alpha) << ',' << pct(r.base_acc) << ',' << pct(r.new_acc) << ','
        << pct(r.hm) << ',' << r.seed << '\n';
  }
}

void print_metrics_table(std::ostream& out, std::span<const MetricsReport> reports) {
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %6s %8s %8s %8s %6s\n", "protocol", "alpha", "B", "N", "HM", "seed");
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-8s %6.2f %8.2f %8.2f %8.2f %6llu\n", to_string(r.protocol).c_str(), r.alpha,
                  r.base_acc, r.new_acc, r.hm, static_cast<unsigned long long>(r.seed));
    out << line;
  }
}

}  // namespace cite
