#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cite/checkpoint.hpp"
#include "cite/datagen.hpp"
#include "cite/losses.hpp"
#include "cite/optimizer.hpp"

namespace cite {

/// Learning rate of the original large-model recipe; the toy default below
/// is larger because the encoders here are ~10^4 times smaller.
inline constexpr double kReferenceLearningRate = 5e-6;

struct TrainConfig {
  std::size_t shots = 16;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double lr = 3e-4;
  std::uint64_t seed = 0;
  LossConfig loss;
  Freezing image_freezing;
  Freezing text_freezing;
  bool train_classifier = true;
  AdamWConfig adamw;
  /// Stops after this many optimizer steps when set (the cosine schedule
  /// still spans the full epoch budget).
  std::optional<std::size_t> max_steps;

  void validate() const;
  /// FNV-1a digest (16 hex chars) over every field.
  std::string fingerprint() const;
};

/// Few-shot training rows with labels local to the task (0..C-1), and the
/// prompt of each local class.
struct TrainingSet {
  Matrix features;
  std::vector<std::size_t> labels;
  std::vector<PromptTokens> class_prompts;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::size_t batch = 0;
  LossTerms loss;
};

struct FinetuneResult {
  Checkpoint checkpoint;
  std::vector<StepRecord> trace;
  std::size_t batches_per_epoch = 0;
};

/// Prompts for the given global classes with class_id renumbered to the
/// position in `classes`.
std::vector<PromptTokens> task_prompts(const Vocabulary& vocab, std::span<const std::size_t> classes);

/// Builds a TrainingSet from dataset rows; labels are positions in `classes`.
TrainingSet make_training_set(const SynthDataset& ds, std::span<const std::size_t> rows,
                              std::span<const std::size_t> classes, const Vocabulary& vocab);

/// Copy of `pretrained` whose classifier is initialized from the text tower's
/// embeddings of `class_prompts`.
Checkpoint with_classifier(const Checkpoint& pretrained, std::span<const PromptTokens> class_prompts);

/// Fine-tunes `init` with L_dva + lambda L_scl + eta L_vld under AdamW with a
/// cosine-annealed learning rate. `init` itself is the frozen zero-shot
/// reference for L_vld. Throws NonFiniteLossError naming the failing step.
FinetuneResult finetune(const Checkpoint& init, const TrainingSet& data, const TrainConfig& cfg);

/// Training-set accuracy (percent) of argmax over cos(image, W).
double classifier_accuracy(const Checkpoint& c, const TrainingSet& data);

struct PretrainConfig {
  std::size_t per_class = 64;
  double caption_noise = 0.1;
  double class_offset = 5.0;
  std::size_t epochs = 50;
  std::size_t batch_size = 64;
  double lr = 3e-3;
  double tau = 0.01;
  std::uint64_t seed = 1;
  AdamWConfig adamw;

  std::string fingerprint() const;
};

/// Stand-in for large-scale contrastive pre-training: random dual encoder
/// trained with the unmasked symmetric contrastive loss on the noisy caption
/// corpus. The returned checkpoint has an empty classifier.
Checkpoint pretrain(const SynthSpec& spec, const PretrainConfig& cfg);

}  // namespace cite
