#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cite/checkpoint.hpp"

namespace cite {

struct EnsembleConfig {
  double alpha = 0.5;
  /// Interpolate the text tower too; when false the fine-tuned text tower is
  /// kept as is and only the image tower is interpolated.
  bool apply_to_text = true;

  void validate() const;
};

/// p = alpha * p_ft + (1 - alpha) * p_zs for every parameter, classifier
/// included. alpha == 1 returns `fine_tuned` and alpha == 0 returns
/// `zero_shot` unchanged. Throws ArchitectureMismatch.
Checkpoint interpolate_params(const Checkpoint& fine_tuned, const Checkpoint& zero_shot, const EnsembleConfig& cfg);

struct Classification {
  /// class_id of the winning prompt per image row.
  std::vector<std::size_t> predicted;
  /// rows = images, cols = prompts in the given order.
  Matrix probabilities;
};

/// Zero-shot style prediction: softmax(cos(image, text(prompt)) / tau),
/// argmax with ties going to the lowest candidate index.
Classification classify(const DualEncoder& model, const Matrix& images, std::span<const PromptTokens> class_prompts,
                        double tau);

/// Same, scoring against the rows of a trained classifier instead of
/// re-encoded prompts. class_ids[i] labels classifier row i.
Classification classify_with_classifier(const EncoderParams& image, const ClassifierW& classifier,
                                        std::span<const std::size_t> class_ids, const Matrix& images, double tau);

/// 2bn / (b + n), 0 when both are 0. Throws NegativeInput.
double harmonic_mean(double base, double novel);

}  // namespace cite
