#include "cite/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cite/error.hpp"
#include "cite/sampling.hpp"

namespace cite {

namespace {

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string describe(const AdamWConfig& a) {
  return "beta1=" + g17(a.beta1) + ";beta2=" + g17(a.beta2) + ";eps=" + g17(a.eps) + ";wd=" + g17(a.weight_decay);
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

// Applies one optimizer step to every trainable tensor in a fixed order.
void apply_update(AdamW& opt, DualEncoder& model, ClassifierW& classifier, const ModelGrads& grads, std::size_t step) {
  std::size_t slot = 0;
  auto update_encoder = [&](EncoderParams& enc, const EncoderGrads& g) {
    for (std::size_t i = 0; i < enc.layers.size(); ++i, slot += 2) {
      if (!enc.layers[i].trainable) continue;
      opt.update(slot, enc.layers[i].weight, g.weights[i], step);
      opt.update(slot + 1, enc.layers[i].bias, g.biases[i], step);
    }
  };
  update_encoder(model.image, grads.image);
  if (grads.text_reached) {
    update_encoder(model.text, grads.text);
  } else {
    slot += 2 * model.text.layers.size();
  }
  if (classifier.trainable && grads.classifier_reached) opt.update(slot, classifier.weights, grads.classifier, step);
}

}  // namespace

void TrainConfig::validate() const {
  if (shots < 1) fail(ErrorCode::kConfig, "shots must be >= 1");
  if (epochs < 1) fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (batch_size < 2) fail(ErrorCode::kConfig, "batch_size must be >= 2");
  if (!(lr >= 0.0)) fail(ErrorCode::kConfig, "lr must be >= 0");
  loss.validate();
}

std::string TrainConfig::fingerprint() const {
  std::ostringstream s;
  s << "shots=" << shots << ";epochs=" << epochs << ";batch=" << batch_size << ";lr=" << g17(lr) << ";seed=" << seed
    << ";lambda=" << g17(loss.lambda) << ";eta=" << g17(loss.eta) << ";tau=" << g17(loss.tau_main)
    << ";tau_vld=" << g17(loss.tau_vld) << ";terms=" << loss.enable_dva << loss.enable_scl << loss.enable_vld
    << loss.vld_symmetric << ";freeze=" << to_string(image_freezing) << "/" << to_string(text_freezing) << "/"
    << train_classifier << ";" << describe(adamw) << ";max_steps=" << (max_steps ? std::to_string(*max_steps) : "-");
  return fnv1a_hex(s.str());
}

std::string PretrainConfig::fingerprint() const {
  std::ostringstream s;
  s << "pretrain;per_class=" << per_class << ";noise=" << g17(caption_noise) << ";offset=" << g17(class_offset) << ";epochs=" << epochs
    << ";batch=" << batch_size << ";lr=" << g17(lr) << ";tau=" << g17(tau) << ";seed=" << seed << ";"
    << describe(adamw);
  return fnv1a_hex(s.str());
}

std::vector<PromptTokens> task_prompts(const Vocabulary& vocab, std::span<const std::size_t> classes) {
  std::vector<PromptTokens> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    PromptTokens p = vocab.render_prompt(classes[i]);
    p.class_id = i;
    out.push_back(std::move(p));
  }
  return out;
}

TrainingSet make_training_set(const SynthDataset& ds, std::span<const std::size_t> rows,
                              std::span<const std::size_t> classes, const Vocabulary& vocab) {
  TrainingSet set;
  set.features = gather_rows(ds.features, rows);
  for (std::size_t r : rows) {
    const auto it = std::find(classes.begin(), classes.end(), ds.class_ids[r]);
    if (it == classes.end()) fail(ErrorCode::kInvalidArgument, "row " + std::to_string(r) + " is not in the task classes");
    set.labels.push_back(static_cast<std::size_t>(it - classes.begin()));
  }
  set.class_prompts = task_prompts(vocab, classes);
  return set;
}

Checkpoint with_classifier(const Checkpoint& pretrained, std::span<const PromptTokens> class_prompts) {
  Checkpoint c = pretrained;
  c.classifier = init_classifier_from_text(pretrained.model.text, class_prompts);
  return c;
}

FinetuneResult finetune(const Checkpoint& init, const TrainingSet& data, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t n = data.features.rows();
  if (data.labels.size() != n) fail(ErrorCode::kShapeMismatch, "one label per training row");
  if (init.classifier.weights.rows() != data.class_prompts.size())
    fail(ErrorCode::kArchitectureMismatch, "classifier rows must equal the number of task classes");
  for (std::size_t l : data.labels)
    if (l >= data.class_prompts.size()) fail(ErrorCode::kLabelOutOfRange, "label without a prompt");

  const DualEncoder zero_shot = init.model;
  FinetuneResult result;
  Checkpoint& cur = result.checkpoint;
  cur = init;
  cur.model.image = set_freezing(cur.model.image, cfg.image_freezing);
  cur.model.text = set_freezing(cur.model.text, cfg.text_freezing);
  cur.classifier.trainable = cfg.train_classifier;
  cur.fingerprint = cfg.fingerprint();

  result.batches_per_epoch = make_batches(n, cfg.batch_size, cfg.seed, 0).size();
  const std::size_t total_steps = cfg.epochs * result.batches_per_epoch;
  const std::size_t budget = cfg.max_steps ? std::min(*cfg.max_steps, total_steps) : total_steps;
  AdamW opt(cfg.adamw, cfg.lr, total_steps);

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs && step < budget; ++epoch) {
    const auto batches = make_batches(n, cfg.batch_size, cfg.seed, epoch);
    for (std::size_t bi = 0; bi < batches.size() && step < budget; ++bi) {
      ++step;
      const auto& rows = batches[bi];
      VLBatch batch;
      batch.image_features = gather_rows(data.features, rows);
      for (std::size_t r : rows) {
        batch.class_ids.push_back(data.labels[r]);
        batch.prompts.push_back(data.class_prompts[data.labels[r]]);
      }
      const LossResult loss = total_loss(batch, cur.model, zero_shot, cur.classifier, cfg.loss);
      if (!std::isfinite(loss.terms.total)) throw NonFiniteLossError(step, "loss is " + std::to_string(loss.terms.total));
      apply_update(opt, cur.model, cur.classifier, loss.grads, step);
      result.trace.push_back(StepRecord{step, epoch, bi, loss.terms});
    }
  }
  cur.step = init.step + step;
  return result;
}

double classifier_accuracy(const Checkpoint& c, const TrainingSet& data) {
  const Matrix scores = cosine_sim(encode_image(c.model.image, data.features), l2_normalize_rows(c.classifier.weights));
  std::size_t correct = 0;
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    auto row = scores.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    correct += best == data.labels[r] ? 1 : 0;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(scores.rows());
}

Checkpoint pretrain(const SynthSpec& spec, const PretrainConfig& cfg) {
  const SynthDataset corpus = generate_pretraining_corpus(spec, cfg.per_class, cfg.caption_noise, cfg.class_offset, cfg.seed);
  const Vocabulary vocab(spec.n_classes);

  Checkpoint c;
  c.model.image = make_image_encoder(spec.feature_dim, cfg.seed * 2 + 1);
  c.model.text = make_text_encoder(vocab.size(), cfg.seed * 2 + 2);
  c.classifier.weights = Matrix(0, kEmbedDim);
  c.fingerprint = cfg.fingerprint();

  const std::size_t n = corpus.rows();
  const std::size_t per_epoch = make_batches(n, cfg.batch_size, cfg.seed, 0).size();
  AdamW opt(cfg.adamw, cfg.lr, cfg.epochs * per_epoch);
  ClassifierW no_classifier{Matrix(0, kEmbedDim), false};
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (const auto& rows : make_batches(n, cfg.batch_size, cfg.seed, epoch)) {
      ++step;
      GradTape tape;
      const EncoderVars iv = bind_encoder(tape, c.model.image);
      const EncoderVars tv = bind_encoder(tape, c.model.text);
      std::vector<PromptTokens> captions;
      for (std::size_t r : rows) captions.push_back(vocab.render_prompt(corpus.class_ids[r]));
      const Var img = forward_encoder(tape, c.model.image, iv, tape.constant(gather_rows(corpus.features, rows)));
      const Var txt = forward_encoder(tape, c.model.text, tv, tape.constant(bag_of_tokens(captions, vocab.size())));
      const Var loss = flyp_loss(tape, img, txt, cfg.tau);
      if (!std::isfinite(tape.value(loss).item())) throw NonFiniteLossError(step, "pre-training loss is not finite");
      tape.backward(loss);
      ModelGrads g;
      for (std::size_t i = 0; i < iv.weights.size(); ++i) {
        g.image.weights.push_back(tape.grad(iv.weights[i]));
        g.image.biases.push_back(tape.grad(iv.biases[i]));
      }
      for (std::size_t i = 0; i < tv.weights.size(); ++i) {
        g.text.weights.push_back(tape.grad(tv.weights[i]));
        g.text.biases.push_back(tape.grad(tv.biases[i]));
      }
      apply_update(opt, c.model, no_classifier, g, step);
    }
  }
  c.step = step;
  return c;
}

}  // namespace cite
