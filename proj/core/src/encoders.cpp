#include "cite/encoders.hpp"

#include <array>
#include <cmath>
#include <random>

#include "cite/error.hpp"

namespace cite {

void EncoderParams::validate() const {
  if (layers.empty()) fail(ErrorCode::kShapeMismatch, "encoder needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols())
      fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " bias is not 1 x out");
    if (i > 0 && layers[i - 1].weight.cols() != l.weight.rows())
      fail(ErrorCode::kShapeMismatch, "layer " + std::to_string(i) + " input does not match previous output");
  }
}

std::string Vocabulary::token(std::size_t id) const {
  static constexpr std::array<const char*, kTemplateWords> kWords = {"a", "photo", "of"};
  if (id < kTemplateWords) return kWords[id];
  if (id < size()) return "class_" + std::to_string(id - kTemplateWords);
  fail(ErrorCode::kUnknownToken, "token id " + std::to_string(id));
}

PromptTokens Vocabulary::render_prompt(std::size_t class_id) const {
  if (class_id >= n_classes_) fail(ErrorCode::kUnknownToken, "no token for class " + std::to_string(class_id));
  return PromptTokens{{0, 1, 2, 0, kTemplateWords + class_id}, class_id};
}

std::vector<PromptTokens> Vocabulary::render_prompts(std::span<const std::size_t> class_ids) const {
  std::vector<PromptTokens> out;
  out.reserve(class_ids.size());
  for (std::size_t c : class_ids) out.push_back(render_prompt(c));
  return out;
}

EncoderParams make_encoder(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) fail(ErrorCode::kInvalidArgument, "encoder needs an input and an output width");
  std::mt19937_64 rng(seed);
  EncoderParams p;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const double limit = std::sqrt(6.0 / static_cast<double>(dims[i] + dims[i + 1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    DenseLayer layer{Matrix(dims[i], dims[i + 1]), Matrix(1, dims[i + 1]), true};
    for (double& w : layer.weight.values()) w = dist(rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

EncoderParams make_image_encoder(std::size_t feature_dim, std::uint64_t seed, std::size_t embed_dim) {
  const std::array<std::size_t, 4> dims{feature_dim, kHiddenWidth, kHiddenWidth, embed_dim};
  return make_encoder(dims, seed);
}

EncoderParams make_text_encoder(std::size_t vocab_size, std::uint64_t seed, std::size_t embed_dim) {
  const std::array<std::size_t, 3> dims{vocab_size, kHiddenWidth, embed_dim};
  return make_encoder(dims, seed);
}

EncoderVars bind_encoder(GradTape& tape, const EncoderParams& p) {
  EncoderVars vars;
  for (const DenseLayer& l : p.layers) {
    vars.weights.push_back(l.trainable ? tape.parameter(l.weight) : tape.constant(l.weight));
    vars.biases.push_back(l.trainable ? tape.parameter(l.bias) : tape.constant(l.bias));
  }
  return vars;
}

Var forward_encoder(GradTape& tape, const EncoderParams& p, const EncoderVars& vars, Var input) {
  if (tape.value(input).cols() != p.input_dim()) {
    fail(ErrorCode::kDimMismatch, "encoder expects " + std::to_string(p.input_dim()) + " input columns, got " +
                                      std::to_string(tape.value(input).cols()));
  }
  Var h = input;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    h = tape.add_row_bias(tape.matmul(h, vars.weights[i]), vars.biases[i]);
    if (i + 1 < p.layers.size()) h = tape.tanh(h);
  }
  return tape.l2_normalize_rows(h);
}

Matrix bag_of_tokens(std::span<const PromptTokens> prompts, std::size_t vocab_size) {
  Matrix bag(prompts.size(), vocab_size);
  for (std::size_t r = 0; r < prompts.size(); ++r) {
    const auto& ids = prompts[r].ids;
    if (ids.empty()) fail(ErrorCode::kUnknownToken, "empty prompt at row " + std::to_string(r));
    const double w = 1.0 / static_cast<double>(ids.size());
    for (std::size_t id : ids) {
      if (id >= vocab_size) fail(ErrorCode::kUnknownToken, "token id " + std::to_string(id) + " outside vocabulary");
      bag(r, id) += w;
    }
  }
  return bag;
}

Matrix encode_image(const EncoderParams& p, const Matrix& features) {
  p.validate();
  GradTape tape;
  EncoderVars vars;
  for (const DenseLayer& l : p.layers) {
    vars.weights.push_back(tape.constant(l.weight));
    vars.biases.push_back(tape.constant(l.bias));
  }
  return tape.value(forward_encoder(tape, p, vars, tape.constant(features)));
}

Matrix encode_text(const EncoderParams& p, std::span<const PromptTokens> prompts) {
  p.validate();
  return encode_image(p, bag_of_tokens(prompts, p.input_dim()));
}

ClassifierW init_classifier_from_text(const EncoderParams& text, std::span<const PromptTokens> class_prompts) {
  const std::size_t n = class_prompts.size();
  if (n == 0) fail(ErrorCode::kMissingClassPrompt, "no class prompts");
  std::vector<const PromptTokens*> by_class(n, nullptr);
  for (const PromptTokens& p : class_prompts) {
    if (p.class_id >= n) fail(ErrorCode::kMissingClassPrompt, "class ids must be 0..C-1, got " + std::to_string(p.class_id));
    if (by_class[p.class_id] != nullptr)
      fail(ErrorCode::kDuplicateClassPrompt, "class " + std::to_string(p.class_id) + " has two prompts");
    by_class[p.class_id] = &p;
  }
  std::vector<PromptTokens> ordered;
  ordered.reserve(n);
  for (const PromptTokens* p : by_class) ordered.push_back(*p);
  return ClassifierW{encode_text(text, ordered), true};
}

EncoderParams set_freezing(EncoderParams p, FreezeMode mode, std::size_t k) {
  const std::size_t n = p.layers.size();
  if (k > n) fail(ErrorCode::kKOutOfRange, "k=" + std::to_string(k) + " exceeds layer count " + std::to_string(n));
  for (std::size_t i = 0; i < n; ++i) {
    switch (mode) {
      case FreezeMode::kNone: p.layers[i].trainable = true; break;
      case FreezeMode::kFreezeFirstK: p.layers[i].trainable = i >= k; break;
      case FreezeMode::kFreezeLastK: p.layers[i].trainable = i < n - k; break;
    }
  }
  return p;
}

std::string to_string(Freezing f) {
  switch (f.mode) {
    case FreezeMode::kNone: return "none";
    case FreezeMode::kFreezeFirstK: return "first:" + std::to_string(f.k);
    case FreezeMode::kFreezeLastK: return "last:" + std::to_string(f.k);
  }
  return "none";
}

Freezing parse_freezing(const std::string& text) {
  if (text == "none") return {};
  const auto colon = text.find(':');
  if (colon == std::string::npos) fail(ErrorCode::kConfig, "freezing must be none, first:<k> or last:<k>");
  const std::string kind = text.substr(0, colon);
  std::size_t k = 0;
  try {
    std::size_t used = 0;
    k = std::stoul(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    fail(ErrorCode::kConfig, "bad layer count in freezing spec '" + text + "'");
  }
  if (kind == "first") return {FreezeMode::kFreezeFirstK, k};
  if (kind == "last") return {FreezeMode::kFreezeLastK, k};
  fail(ErrorCode::kConfig, "unknown freezing mode '" + kind + "'");
}

}  // namespace cite
