#include "cite/ensemble.hpp"

#include <string>

#include "cite/error.hpp"

namespace cite {

namespace {

// zs + alpha (ft - zs): algebraically alpha ft + (1 - alpha) zs, and
// exact whenever ft == zs.
Matrix lerp(const Matrix& ft, const Matrix& zs, double alpha) {
  Matrix out(ft.rows(), ft.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values()[i] = zs.values()[i] + alpha * (ft.values()[i] - zs.values()[i]);
  return out;
}

void lerp_encoder(EncoderParams& out, const EncoderParams& zs, double alpha) {
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    out.layers[i].weight = lerp(out.layers[i].weight, zs.layers[i].weight, alpha);
    out.layers[i].bias = lerp(out.layers[i].bias, zs.layers[i].bias, alpha);
  }
}

Classification predict(const Matrix& scores, std::span<const std::size_t> ids, double tau) {
  Classification out;
  out.probabilities = softmax_rows(scores, tau);
  out.predicted.reserve(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    out.predicted.push_back(ids[best]);
  }
  return out;
}

}  // namespace

void EnsembleConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) fail(ErrorCode::kConfig, "alpha must lie in [0, 1], got " + std::to_string(alpha));
}

Checkpoint interpolate_params(const Checkpoint& fine_tuned, const Checkpoint& zero_shot, const EnsembleConfig& cfg) {
  cfg.validate();
  if (!same_architecture(fine_tuned, zero_shot))
    fail(ErrorCode::kArchitectureMismatch, "fine-tuned and zero-shot checkpoints differ in shape");
  if (cfg.alpha == 1.0) return fine_tuned;
  if (cfg.alpha == 0.0 && cfg.apply_to_text) return zero_shot;

  Checkpoint out = fine_tuned;
  lerp_encoder(out.model.image, zero_shot.model.image, cfg.alpha);
  if (cfg.apply_to_text) lerp_encoder(out.model.text, zero_shot.model.text, cfg.alpha);
  out.classifier.weights = lerp(fine_tuned.classifier.weights, zero_shot.classifier.weights, cfg.alpha);
  return out;
}

Classification classify(const DualEncoder& model, const Matrix& images, std::span<const PromptTokens> class_prompts,
                        double tau) {
  if (class_prompts.empty()) fail(ErrorCode::kEmptyClassSet, "classify needs at least one candidate class");
  std::vector<std::size_t> ids;
  for (const auto& p : class_prompts) ids.push_back(p.class_id);
  const Matrix scores = cosine_sim(encode_image(model.image, images), encode_text(model.text, class_prompts));
  return predict(scores, ids, tau);
}

Classification classify_with_classifier(const EncoderParams& image, const ClassifierW& classifier,
                                        std::span<const std::size_t> class_ids, const Matrix& images, double tau) {
  if (classifier.weights.rows() == 0) fail(ErrorCode::kEmptyClassSet, "classifier has no rows");
  if (class_ids.size() != classifier.weights.rows()) fail(ErrorCode::kShapeMismatch, "one class id per classifier row");
  const Matrix scores = cosine_sim(encode_image(image, images), l2_normalize_rows(classifier.weights));
  return predict(scores, class_ids, tau);
}

double harmonic_mean(double base, double novel) {
  if (base < 0.0 || novel < 0.0) fail(ErrorCode::kNegativeInput, "harmonic_mean inputs must be >= 0");
  if (base + novel == 0.0) return 0.0;
  return 2.0 * base * novel / (base + novel);
}

}  // namespace cite
