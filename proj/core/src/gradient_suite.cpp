#include "cite/gradient_suite.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <random>

#include "cite/grad_check.hpp"

namespace cite {

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (double& v : m.values()) v = n(rng);
  return m;
}

void corrupt(Matrix* g, bool on) {
  if (on && g != nullptr)
    for (double& v : g->values()) v *= 1.0 + 1e-2;
}

// Runs `build` on a fresh tape with `params` bound as the only parameter and
// returns the loss value, writing the gradient when requested.
double eval_on_tape(const Matrix& params, Matrix* grad, const std::function<Var(GradTape&, Var)>& build) {
  GradTape tape;
  Var p = tape.parameter(params);
  Var loss = build(tape, p);
  const double v = tape.value(loss).item();
  if (grad != nullptr) {
    tape.backward(loss);
    *grad = tape.grad(p);
  }
  return v;
}

}  // namespace

std::vector<GradientCheckLine> run_gradient_suite(const GradientSuiteOptions& opts) {
  std::array<GradientCheckLine, 4> lines{{{"dva", 0.0}, {"scl", 0.0}, {"vld", 0.0}, {"total", 0.0}}};
  const LossConfig& cfg = opts.loss;

  for (std::size_t inst = 0; inst < opts.instances; ++inst) {
    std::mt19937_64 rng(opts.seed * 1000003ULL + inst);
    const std::size_t b = std::uniform_int_distribution<std::size_t>(2, opts.max_batch)(rng);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(3, opts.max_dim)(rng);
    const std::size_t n_classes = std::uniform_int_distribution<std::size_t>(2, 4)(rng);
    std::vector<std::size_t> labels(b);
    for (auto& l : labels) l = std::uniform_int_distribution<std::size_t>(0, n_classes - 1)(rng);

    const Matrix raw_img = random_matrix(b, d, rng);
    const Matrix raw_txt = random_matrix(b, d, rng);
    const Matrix raw_w = random_matrix(n_classes, d, rng);
    const Matrix img_zs = l2_normalize_rows(random_matrix(b, d, rng));
    const Matrix txt_zs = l2_normalize_rows(random_matrix(b, d, rng));

    auto check = [&](std::size_t line, const Matrix& at, const std::function<Var(GradTape&, Var)>& build) {
      DifferentiableFn f = [&](const Matrix& p, Matrix* g) {
        const double v = eval_on_tape(p, g, build);
        corrupt(g, opts.corrupt_analytic);
        return v;
      };
      lines[line].max_rel_error = std::max(lines[line].max_rel_error, grad_check(f, at, opts.step));
    };

    // dva: w.r.t. raw image rows and raw classifier rows.
    check(0, raw_img, [&](GradTape& t, Var p) {
      return dva_loss(t, t.l2_normalize_rows(p), t.l2_normalize_rows(t.constant(raw_w)), labels, cfg.tau_main);
    });
    check(0, raw_w, [&](GradTape& t, Var p) {
      return dva_loss(t, t.l2_normalize_rows(t.constant(raw_img)), t.l2_normalize_rows(p), labels, cfg.tau_main);
    });
    // scl: both towers' raw embeddings.
    check(1, raw_img, [&](GradTape& t, Var p) {
      return scl_loss(t, t.l2_normalize_rows(p), t.l2_normalize_rows(t.constant(raw_txt)), labels, cfg.tau_main);
    });
    check(1, raw_txt, [&](GradTape& t, Var p) {
      return scl_loss(t, t.l2_normalize_rows(t.constant(raw_img)), t.l2_normalize_rows(p), labels, cfg.tau_main);
    });
    // vld: fine-tuned side only; zero-shot side is constant.
    check(2, raw_img, [&](GradTape& t, Var p) {
      return vld_loss(t, t.l2_normalize_rows(p), t.l2_normalize_rows(t.constant(raw_txt)), img_zs, txt_zs, cfg.tau_vld,
                      cfg.vld_symmetric);
    });
    check(2, raw_txt, [&](GradTape& t, Var p) {
      return vld_loss(t, t.l2_normalize_rows(t.constant(raw_img)), t.l2_normalize_rows(p), img_zs, txt_zs, cfg.tau_vld,
                      cfg.vld_symmetric);
    });

    // total: every parameter matrix of a small dual encoder plus W.
    const std::size_t feat = 6;
    const std::size_t hidden = 8;
    Vocabulary vocab(n_classes);
    const std::array<std::size_t, 4> image_dims{feat, hidden, hidden, d};
    const std::array<std::size_t, 3> text_dims{vocab.size(), hidden, d};
    DualEncoder model{make_encoder(image_dims, rng()), make_encoder(text_dims, rng())};
    const DualEncoder zs{make_encoder(image_dims, rng()), make_encoder(text_dims, rng())};
    for (auto* enc : {&model.image, &model.text})
      for (auto& layer : enc->layers)
        for (double& v : layer.bias.values()) v = std::normal_distribution<double>(0.0, 0.1)(rng);
    VLBatch batch{random_matrix(b, feat, rng), labels, vocab.render_prompts(labels)};
    ClassifierW w{raw_w, true};

    auto check_total = [&](Matrix& slot, auto pick_grad) {
      const Matrix at = slot;
      DifferentiableFn f = [&](const Matrix& p, Matrix* g) {
        slot = p;
        LossResult r = total_loss(batch, model, zs, w, cfg);
        slot = at;
        if (g != nullptr) {
          *g = pick_grad(r.grads);
          corrupt(g, opts.corrupt_analytic);
        }
        return r.terms.total;
      };
      lines[3].max_rel_error = std::max(lines[3].max_rel_error, grad_check(f, at, opts.step));
    };
    for (std::size_t i = 0; i < model.image.layers.size(); ++i) {
      check_total(model.image.layers[i].weight, [i](const ModelGrads& g) { return g.image.weights[i]; });
      check_total(model.image.layers[i].bias, [i](const ModelGrads& g) { return g.image.biases[i]; });
    }
    for (std::size_t i = 0; i < model.text.layers.size(); ++i) {
      check_total(model.text.layers[i].weight, [i](const ModelGrads& g) { return g.text.weights[i]; });
      check_total(model.text.layers[i].bias, [i](const ModelGrads& g) { return g.text.biases[i]; });
    }
    check_total(w.weights, [](const ModelGrads& g) { return g.classifier; });
  }
  return {lines.begin(), lines.end()};
}

}  // namespace cite
