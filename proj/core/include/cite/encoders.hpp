#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cite/grad_tape.hpp"
#include "cite/matrix.hpp"

namespace cite {

/// Affine layer y = x * weight + bias, weight is in x out, bias is 1 x out.
struct DenseLayer {
  Matrix weight;
  Matrix bias;
  bool trainable = true;
};

/// A tanh MLP whose output rows are L2-normalized. Hidden layers apply tanh,
/// the final layer is affine only.
struct EncoderParams {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const { return layers.front().weight.rows(); }
  std::size_t output_dim() const { return layers.back().weight.cols(); }
  /// Throws ShapeMismatch if the layer dims do not chain.
  void validate() const;
};

/// The two towers of a dual encoder.
struct DualEncoder {
  EncoderParams image;
  EncoderParams text;
};

/// Classifier rows, one per base class, seeded from prompt embeddings and
/// then trained independently of the text tower.
struct ClassifierW {
  Matrix weights;
  bool trainable = true;
};

struct PromptTokens {
  std::vector<std::size_t> ids;
  std::size_t class_id = 0;
};

/// Fixed toy vocabulary: the template words "a", "photo", "of" at ids 0..2,
/// then one synthetic token "class_<k>" per class at id 3 + k.
class Vocabulary {
 public:
  static constexpr std::size_t kTemplateWords = 3;

  explicit Vocabulary(std::size_t n_classes) : n_classes_(n_classes) {}

  std::size_t size() const noexcept { return kTemplateWords + n_classes_; }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::string token(std::size_t id) const;

  /// Renders "a photo of a class_<k>".
  PromptTokens render_prompt(std::size_t class_id) const;
  std::vector<PromptTokens> render_prompts(std::span<const std::size_t> class_ids) const;

 private:
  std::size_t n_classes_;
};

/// Xavier-uniform weights and zero biases for the given layer widths
/// (dims.size() - 1 layers).
EncoderParams make_encoder(std::span<const std::size_t> dims, std::uint64_t seed);

constexpr std::size_t kHiddenWidth = 64;
constexpr std::size_t kEmbedDim = 32;

/// feature_dim -> 64 -> 64 -> embed_dim.
EncoderParams make_image_encoder(std::size_t feature_dim, std::uint64_t seed, std::size_t embed_dim = kEmbedDim);
/// vocab -> 64 (token embedding table) -> embed_dim.
EncoderParams make_text_encoder(std::size_t vocab_size, std::uint64_t seed, std::size_t embed_dim = kEmbedDim);

/// Tape handles for one encoder's weights. Frozen layers are bound as
/// constants and therefore never receive gradient.
struct EncoderVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

EncoderVars bind_encoder(GradTape& tape, const EncoderParams& p);
/// Records the MLP forward and the final row normalization.
Var forward_encoder(GradTape& tape, const EncoderParams& p, const EncoderVars& vars, Var input);

/// m x vocab matrix whose row r is the mean of the one-hot vectors of prompt
/// r's tokens. Mean pooling of token embeddings is this matrix times the
/// embedding table.
Matrix bag_of_tokens(std::span<const PromptTokens> prompts, std::size_t vocab_size);

Matrix encode_image(const EncoderParams& p, const Matrix& features);
Matrix encode_text(const EncoderParams& p, std::span<const PromptTokens> prompts);

/// Row i = encode_text of the prompt whose class_id is i. Prompts must cover
/// 0..C-1 exactly once each.
ClassifierW init_classifier_from_text(const EncoderParams& text, std::span<const PromptTokens> class_prompts);

enum class FreezeMode { kNone, kFreezeFirstK, kFreezeLastK };

struct Freezing {
  FreezeMode mode = FreezeMode::kNone;
  std::size_t k = 0;
};

EncoderParams set_freezing(EncoderParams p, FreezeMode mode, std::size_t k);
inline EncoderParams set_freezing(EncoderParams p, Freezing f) { return set_freezing(std::move(p), f.mode, f.k); }

std::string to_string(Freezing f);
/// Parses "none", "first:<k>" or "last:<k>".
Freezing parse_freezing(const std::string& text);

}  // namespace cite
