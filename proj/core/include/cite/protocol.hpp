#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "cite/checkpoint.hpp"
#include "cite/datagen.hpp"
#include "cite/ensemble.hpp"
#include "cite/trainer.hpp"

namespace cite {

/// FSL: same classes, same domain. BNG: base -> new classes, same domain.
/// DG: same classes, shifted domain. CDG: base -> new classes and a shifted
/// domain.
enum class Protocol { kFSL, kBNG, kDG, kCDG };

std::string to_string(Protocol p);
Protocol parse_protocol(const std::string& text);

struct SplitSpec {
  std::vector<std::size_t> base_classes;
  std::vector<std::size_t> new_classes;
  std::size_t train_domain = 0;
  std::size_t test_domain = 0;
  Protocol protocol = Protocol::kBNG;

  void validate() const;
};

/// FSL/DG use every class as both base and new; BNG/CDG use `split`.
SplitSpec make_split_spec(Protocol protocol, const ClassSplit& split, std::size_t n_classes, std::size_t train_domain,
                          std::size_t test_domain);

struct MetricsReport {
  Protocol protocol = Protocol::kBNG;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  double base_acc = 0.0;
  double new_acc = 0.0;
  double hm = 0.0;
  /// Global class id -> accuracy in percent on that class's test rows.
  std::map<std::size_t, double> per_class;
};

struct EvalOptions {
  double tau = 0.01;
  /// Score both base and new rows against base u new prompts.
  bool joint_candidates = false;
  /// Score base rows with the trained classifier W instead of prompts.
  bool use_classifier_for_base = false;
};

/// Evaluates a model on the held-out rows of spec.test_domain. FSL/DG report
/// the single accuracy as both B and N.
MetricsReport evaluate(const Checkpoint& model, const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                       const EvalOptions& opts = {});

/// Few-shot training set for a spec: `shots` rows per base class from the
/// train half of the train domain.
TrainingSet build_training_set(const SplitSpec& spec, const std::vector<SynthDataset>& domains, std::size_t shots,
                               std::uint64_t seed);

struct ProtocolOutcome {
  Checkpoint zero_shot;  ///< pretrained weights with W initialized from prompts
  FinetuneResult fine_tuned;
  MetricsReport report;
};

/// Sample -> fine-tune -> interpolate -> evaluate.
ProtocolOutcome run_protocol(const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                             const Checkpoint& pretrained, const TrainConfig& train_cfg,
                             const EnsembleConfig& ens_cfg, const EvalOptions& eval_opts = {});

/// One report per alpha, in the given order.
std::vector<MetricsReport> alpha_sweep(const Checkpoint& fine_tuned, const Checkpoint& zero_shot,
                                       const SplitSpec& spec, const std::vector<SynthDataset>& domains,
                                       std::span<const double> alphas, std::uint64_t seed,
                                       const EvalOptions& eval_opts = {});

/// Mean over batches of L_vld between `model` and `zero_shot` on dataset
/// rows `rows`, batched with make_batches(seed, epoch 0); each row is paired
/// with its class prompt.
double mean_vld_divergence(const DualEncoder& model, const DualEncoder& zero_shot, const SynthDataset& ds,
                           std::span<const std::size_t> rows, std::size_t batch_size, double tau,
                           std::uint64_t seed = 0);

/// CSV with header "protocol,alpha,B,N,HM,seed"; percents to 2 decimals.
void write_metrics_csv(std::ostream& out, std::span<const MetricsReport> reports);
void print_metrics_table(std::ostream& out, std::span<const MetricsReport> reports);

}  // namespace cite
