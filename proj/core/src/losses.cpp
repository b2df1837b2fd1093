#include "cite/losses.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "cite/error.hpp"

namespace cite {

void LossConfig::validate() const {
  if (!(tau_main > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "tau_main must be > 0");
  if (!(tau_vld > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "tau_vld must be > 0");
  if (!(lambda >= 0.0)) fail(ErrorCode::kConfig, "lambda must be >= 0");
  if (!(eta >= 0.0)) fail(ErrorCode::kConfig, "eta must be >= 0");
}

RowMask scl_mask(std::span<const std::size_t> class_ids) {
  const std::size_t b = class_ids.size();
  RowMask mask{b, b, std::vector<std::uint8_t>(b * b, 1)};
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t j = 0; j < b; ++j)
      if (i != j && class_ids[i] == class_ids[j]) mask.keep[i * b + j] = 0;
  return mask;
}

Var dva_loss(GradTape& tape, Var img_emb, Var classifier, std::span<const std::size_t> labels, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "dva tau");
  const std::size_t n_classes = tape.value(classifier).rows();
  for (std::size_t l : labels)
    if (l >= n_classes) fail(ErrorCode::kLabelOutOfRange, "label " + std::to_string(l) + " >= C=" + std::to_string(n_classes));
  Var logits = tape.scale(tape.matmul_nt(img_emb, classifier), 1.0 / tau);
  return tape.masked_cross_entropy(logits, labels);
}

Var scl_loss(GradTape& tape, Var img_emb, Var txt_emb, std::span<const std::size_t> class_ids, double tau) {
  if (!(tau > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "scl tau");
  const std::size_t b = tape.value(img_emb).rows();
  if (b < 2) fail(ErrorCode::kBatchTooSmall, "scl_loss needs at least 2 rows");
  if (tape.value(txt_emb).rows() != b || class_ids.size() != b)
    fail(ErrorCode::kShapeMismatch, "scl_loss: image, text and class rows differ");
  const RowMask mask = scl_mask(class_ids);
  std::vector<std::size_t> diag(b);
  std::iota(diag.begin(), diag.end(), std::size_t{0});
  Var logits = tape.scale(tape.matmul_nt(img_emb, txt_emb), 1.0 / tau);
  // The mask is symmetric, so it serves both directions.
  Var image_to_text = tape.masked_cross_entropy(logits, diag, &mask);
  Var text_to_image = tape.masked_cross_entropy(tape.transpose(logits), diag, &mask);
  return tape.add(image_to_text, text_to_image);
}

Var flyp_loss(GradTape& tape, Var img_emb, Var txt_emb, double tau) {
  const std::size_t b = tape.value(img_emb).rows();
  std::vector<std::size_t> distinct(b);
  std::iota(distinct.begin(), distinct.end(), std::size_t{0});
  return scl_loss(tape, img_emb, txt_emb, distinct, tau);
}

Var vld_loss(GradTape& tape, Var img_ft, Var txt_ft, const Matrix& img_zs, const Matrix& txt_zs, double tau,
             bool symmetric) {
  if (!(tau > 0.0)) fail(ErrorCode::kNonPositiveTemperature, "vld tau");
  const Matrix& i_ft = tape.value(img_ft);
  const Matrix& t_ft = tape.value(txt_ft);
  if (!i_ft.same_shape(t_ft) || !i_ft.same_shape(img_zs) || !i_ft.same_shape(txt_zs))
    fail(ErrorCode::kShapeMismatch, "vld_loss: all four embedding matrices must share a shape");
  // The zero-shot logits follow the exact arithmetic of the taped side.
  GradTape zs;
  const Matrix zs_logits = zs.value(zs.scale(zs.matmul_nt(zs.constant(img_zs), zs.constant(txt_zs)), 1.0 / tau));
  Var logits = tape.scale(tape.matmul_nt(img_ft, txt_ft), 1.0 / tau);
  Var loss = tape.kl_from_logits(logits, zs_logits);
  if (symmetric) loss = tape.add(loss, tape.kl_from_logits(tape.transpose(logits), transpose(zs_logits)));
  return loss;
}

double dva_loss(const Matrix& img_emb, const Matrix& classifier, std::span<const std::size_t> labels, double tau) {
  GradTape tape;
  return tape.value(dva_loss(tape, tape.constant(img_emb), tape.constant(classifier), labels, tau)).item();
}

double scl_loss(const Matrix& img_emb, const Matrix& txt_emb, std::span<const std::size_t> class_ids, double tau) {
  GradTape tape;
  return tape.value(scl_loss(tape, tape.constant(img_emb), tape.constant(txt_emb), class_ids, tau)).item();
}

double flyp_loss(const Matrix& img_emb, const Matrix& txt_emb, double tau) {
  GradTape tape;
  return tape.value(flyp_loss(tape, tape.constant(img_emb), tape.constant(txt_emb), tau)).item();
}

double vld_loss(const Matrix& img_ft, const Matrix& txt_ft, const Matrix& img_zs, const Matrix& txt_zs, double tau,
                bool symmetric) {
  GradTape tape;
  return tape.value(vld_loss(tape, tape.constant(img_ft), tape.constant(txt_ft), img_zs, txt_zs, tau, symmetric)).item();
}

namespace {

EncoderGrads collect(const GradTape& tape, const EncoderVars& vars) {
  EncoderGrads g;
  for (Var w : vars.weights) g.weights.push_back(tape.grad(w));
  for (Var b : vars.biases) g.biases.push_back(tape.grad(b));
  return g;
}

}  // namespace

LossResult total_loss(const VLBatch& batch, const DualEncoder& model, const DualEncoder& zero_shot,
                      const ClassifierW& classifier, const LossConfig& cfg) {
  cfg.validate();
  const std::size_t b = batch.image_features.rows();
  if (batch.class_ids.size() != b || batch.prompts.size() != b)
    fail(ErrorCode::kShapeMismatch, "batch rows, class ids and prompts must align");
  for (std::size_t i = 0; i < b; ++i) {
    if (batch.prompts[i].class_id != batch.class_ids[i])
      fail(ErrorCode::kInvalidArgument, "prompt class differs from row class at row " + std::to_string(i));
  }

  GradTape tape;
  const EncoderVars image_vars = bind_encoder(tape, model.image);
  const EncoderVars text_vars = bind_encoder(tape, model.text);
  const Var w = classifier.trainable ? tape.parameter(classifier.weights) : tape.constant(classifier.weights);

  const Var img = forward_encoder(tape, model.image, image_vars, tape.constant(batch.image_features));
  const bool need_text = cfg.enable_scl || cfg.enable_vld;
  Var txt{};
  if (need_text) txt = forward_encoder(tape, model.text, text_vars, tape.constant(bag_of_tokens(batch.prompts, model.text.input_dim())));

  LossTerms terms;
  std::vector<std::pair<Var, double>> parts;
  if (cfg.enable_dva) {
    Var l = dva_loss(tape, img, tape.l2_normalize_rows(w), batch.class_ids, cfg.tau_main);
    terms.dva = tape.value(l).item();
    parts.emplace_back(l, 1.0);
  }
  if (cfg.enable_scl) {
    Var l = scl_loss(tape, img, txt, batch.class_ids, cfg.tau_main);
    terms.scl = tape.value(l).item();
    parts.emplace_back(l, cfg.lambda);
  }
  if (cfg.enable_vld) {
    const Matrix img_zs = encode_image(zero_shot.image, batch.image_features);
    const Matrix txt_zs = encode_text(zero_shot.text, batch.prompts);
    Var l = vld_loss(tape, img, txt, img_zs, txt_zs, cfg.tau_vld, cfg.vld_symmetric);
    terms.vld = tape.value(l).item();
    parts.emplace_back(l, cfg.eta);
  }
  if (parts.empty()) fail(ErrorCode::kConfig, "every loss term is disabled");

  Var total = parts[0].second == 1.0 ? parts[0].first : tape.scale(parts[0].first, parts[0].second);
  for (std::size_t i = 1; i < parts.size(); ++i) total = tape.add(total, tape.scale(parts[i].first, parts[i].second));
  terms.total = tape.value(total).item();

  LossResult result;
  result.terms = terms;
  if (std::isfinite(terms.total)) {
    tape.backward(total);
    result.grads.image = collect(tape, image_vars);
    result.grads.text = collect(tape, text_vars);
    result.grads.classifier = tape.grad(w);
    result.grads.text_reached = need_text;
    result.grads.classifier_reached = cfg.enable_dva;
  }
  return result;
}

}  // namespace cite
