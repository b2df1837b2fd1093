#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cite/encoders.hpp"
#include "cite/grad_tape.hpp"
#include "cite/matrix.hpp"

namespace cite {

struct LossConfig {
  double lambda = 0.7;
  double eta = 0.1;
  double tau_main = 0.01;
  double tau_vld = 0.1;
  bool enable_dva = true;
  bool enable_scl = true;
  bool enable_vld = true;
  /// Adds the text->image direction to the distillation term.
  bool vld_symmetric = false;

  void validate() const;
};

/// One training batch. class_ids index the task's base classes (and W rows);
/// prompts[i] is the rendered prompt of row i's class.
struct VLBatch {
  Matrix image_features;
  std::vector<std::size_t> class_ids;
  std::vector<PromptTokens> prompts;
};

// Tape-level losses. Embedding inputs are expected to be row-normalized.

/// -sum_x log softmax(cos(x, W) / tau)[label_x]. `classifier` must already be
/// row-normalized.
Var dva_loss(GradTape& tape, Var img_emb, Var classifier, std::span<const std::size_t> labels, double tau);

/// Symmetric image<->text NLL whose denominators keep the matched pair and
/// every pair of a different class; other same-class pairs are masked out.
Var scl_loss(GradTape& tape, Var img_emb, Var txt_emb, std::span<const std::size_t> class_ids, double tau);

/// Unmasked symmetric InfoNCE over matched rows.
Var flyp_loss(GradTape& tape, Var img_emb, Var txt_emb, double tau);

/// sum_rows KL(softmax(cos(img_ft, txt_ft)/tau) || softmax(cos(img_zs, txt_zs)/tau)),
/// softmax taken per image over the batch texts. Zero-shot side is constant.
Var vld_loss(GradTape& tape, Var img_ft, Var txt_ft, const Matrix& img_zs, const Matrix& txt_zs, double tau,
             bool symmetric = false);

/// Entry (i, j) is kept unless i != j and both rows share a class.
RowMask scl_mask(std::span<const std::size_t> class_ids);

// Value-only wrappers.
double dva_loss(const Matrix& img_emb, const Matrix& classifier, std::span<const std::size_t> labels, double tau);
double scl_loss(const Matrix& img_emb, const Matrix& txt_emb, std::span<const std::size_t> class_ids, double tau);
double flyp_loss(const Matrix& img_emb, const Matrix& txt_emb, double tau);
double vld_loss(const Matrix& img_ft, const Matrix& txt_ft, const Matrix& img_zs, const Matrix& txt_zs, double tau,
                bool symmetric = false);

struct LossTerms {
  double dva = 0.0;
  double scl = 0.0;
  double vld = 0.0;
  double total = 0.0;
};

struct EncoderGrads {
  std::vector<Matrix> weights;
  std::vector<Matrix> biases;
};

struct ModelGrads {
  EncoderGrads image;
  EncoderGrads text;
  Matrix classifier;
  /// False when no enabled term touches the tensor; the optimizer then skips
  /// it entirely (no weight decay either).
  bool text_reached = true;
  bool classifier_reached = true;
};

struct LossResult {
  LossTerms terms;
  ModelGrads grads;
};

/// L = L_dva + lambda * L_scl + eta * L_vld over the enabled terms.
/// L_dva only reaches the image tower and W; L_scl and L_vld reach both
/// towers. `zero_shot` is the frozen pre-fine-tuning snapshot.
LossResult total_loss(const VLBatch& batch, const DualEncoder& model, const DualEncoder& zero_shot,
                      const ClassifierW& classifier, const LossConfig& cfg);

}  // namespace cite
