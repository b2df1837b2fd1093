#include "cite/grad_tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cite/error.hpp"

namespace cite {

Var GradTape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, false, {}});
  return Var{nodes_.size() - 1};
}

Var GradTape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, true, {}});
  return Var{nodes_.size() - 1};
}

Matrix GradTape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty() && !n.value.empty()) return Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var GradTape::record(Matrix value, std::initializer_list<Var> inputs,
                     std::function<void(GradTape&, const Matrix&)> bw) {
  bool needs = false;
  for (Var in : inputs) needs = needs || nodes_.at(in.id).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs, needs ? std::move(bw) : nullptr});
  return Var{nodes_.size() - 1};
}

void GradTape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void GradTape::backward(Var root) {
  if (backward_done_) fail(ErrorCode::kInvalidArgument, "backward() already ran on this tape");
  const Node& r = nodes_.at(root.id);
  if (r.value.rows() != 1 || r.value.cols() != 1) fail(ErrorCode::kShapeMismatch, "backward root must be 1x1");
  backward_done_ = true;
  if (!r.requires_grad) return;
  nodes_[root.id].grad = Matrix::scalar(1.0);
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    // The closure may append to nothing, but copy the gradient so that
    // accumulation into other nodes cannot alias it.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

Var GradTape::matmul(Var a, Var b) {
  Matrix out = cite::matmul(value(a), value(b));
  return record(std::move(out), {a, b}, [a, b](GradTape& t, const Matrix& g) {
    if (t.wants(a)) t.accumulate(a, cite::matmul_nt(g, t.value(b)));
    if (t.wants(b)) t.accumulate(b, cite::matmul(cite::transpose(t.value(a)), g));
  });
}

Var GradTape::matmul_nt(Var a, Var b) {
  Matrix out = cite::matmul_nt(value(a), value(b));
  return record(std::move(out), {a, b}, [a, b](GradTape& t, const Matrix& g) {
    if (t.wants(a)) t.accumulate(a, cite::matmul(g, t.value(b)));
    if (t.wants(b)) t.accumulate(b, cite::matmul(cite::transpose(g), t.value(a)));
  });
}

Var GradTape::add(Var a, Var b) {
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  if (!av.same_shape(bv)) fail(ErrorCode::kShapeMismatch, "add: operand shapes differ");
  Matrix out = av;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += bv.values()[i];
  return record(std::move(out), {a, b}, [a, b](GradTape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var GradTape::add_row_bias(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) fail(ErrorCode::kDimMismatch, "add_row_bias: bias must be 1xC");
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bv(0, c);
  }
  return record(std::move(out), {a, bias}, [a, bias](GradTape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.wants(bias)) {
      Matrix gb(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gb(0, c) += g(r, c);
      t.accumulate(bias, gb);
    }
  });
}

Var GradTape::scale(Var a, double factor) {
  Matrix out = value(a);
  for (double& v : out.values()) v *= factor;
  return record(std::move(out), {a}, [a, factor](GradTape& t, const Matrix& g) {
    Matrix ga = g;
    for (double& v : ga.values()) v *= factor;
    t.accumulate(a, ga);
  });
}

Var GradTape::tanh(Var a) {
  Matrix out = value(a);
  for (double& v : out.values()) v = std::tanh(v);
  const std::size_t self = nodes_.size();
  return record(std::move(out), {a}, [a, self](GradTape& t, const Matrix& g) {
    const Matrix& y = t.nodes_[self].value;
    Matrix ga = g;
    for (std::size_t i = 0; i < ga.size(); ++i) ga.values()[i] *= 1.0 - y.values()[i] * y.values()[i];
    t.accumulate(a, ga);
  });
}

Var GradTape::transpose(Var a) {
  return record(cite::transpose(value(a)), {a},
                [a](GradTape& t, const Matrix& g) { t.accumulate(a, cite::transpose(g)); });
}

Var GradTape::l2_normalize_rows(Var a) {
  const Matrix& x = value(a);
  Matrix out = cite::l2_normalize_rows(x);
  std::vector<double> norms(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (double v : x.row(r)) sq += v * v;
    norms[r] = std::sqrt(sq);
  }
  const std::size_t self = nodes_.size();
  return record(std::move(out), {a}, [a, self, norms = std::move(norms)](GradTape& t, const Matrix& g) {
    // d(x/|x|) = (g - y <y, g>) / |x|
    const Matrix& y = t.nodes_[self].value;
    Matrix ga(g.rows(), g.cols());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      auto yr = y.row(r);
      auto gr = g.row(r);
      double dot = 0.0;
      for (std::size_t c = 0; c < gr.size(); ++c) dot += yr[c] * gr[c];
      for (std::size_t c = 0; c < gr.size(); ++c) ga(r, c) = (gr[c] - yr[c] * dot) / norms[r];
    }
    t.accumulate(a, ga);
  });
}

Var GradTape::masked_cross_entropy(Var logits, std::span<const std::size_t> targets, const RowMask* mask) {
  const Matrix& z = value(logits);
  if (targets.size() != z.rows()) fail(ErrorCode::kShapeMismatch, "masked_cross_entropy: one target per row");
  if (mask != nullptr && (mask->rows != z.rows() || mask->cols != z.cols()))
    fail(ErrorCode::kShapeMismatch, "masked_cross_entropy: mask shape");

  Matrix probs(z.rows(), z.cols());
  double loss = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    const std::size_t tgt = targets[r];
    if (tgt >= z.cols()) fail(ErrorCode::kLabelOutOfRange, "target " + std::to_string(tgt) + " >= " + std::to_string(z.cols()));
    if (mask != nullptr && !(*mask)(r, tgt)) fail(ErrorCode::kInvalidArgument, "mask drops the target entry");
    double mx = -INFINITY;
    for (std::size_t c = 0; c < z.cols(); ++c)
      if (mask == nullptr || (*mask)(r, c)) mx = std::max(mx, z(r, c));
    double sum = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      if (mask != nullptr && !(*mask)(r, c)) continue;
      probs(r, c) = std::exp(z(r, c) - mx);
      sum += probs(r, c);
    }
    for (double& p : probs.row(r)) p /= sum;
    loss += (mx + std::log(sum)) - z(r, tgt);
  }
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return record(Matrix::scalar(loss), {logits},
                [logits, probs = std::move(probs), tg = std::move(tg)](GradTape& t, const Matrix& g) {
                  const double up = g.item();
                  Matrix gz = probs;
                  for (std::size_t r = 0; r < gz.rows(); ++r) gz(r, tg[r]) -= 1.0;
                  for (double& v : gz.values()) v *= up;
                  t.accumulate(logits, gz);
                });
}

Var GradTape::kl_from_logits(Var logits, const Matrix& q_logits) {
  const Matrix& z = value(logits);
  if (!z.same_shape(q_logits)) fail(ErrorCode::kShapeMismatch, "kl_from_logits: logits and Q differ in shape");
  // Both sides go through the same log-softmax so equal logits give exactly 0.
  const Matrix logp = log_softmax_rows(z, 1.0);
  const Matrix logq = log_softmax_rows(q_logits, 1.0);
  // dL/dz_k = P_k (log P_k - log Q_k - KL_row)
  Matrix gz(z.rows(), z.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double row_kl = 0.0;
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double p = std::exp(logp(r, c));
      if (p == 0.0) continue;
      if (std::exp(logq(r, c)) < 1e-30) {
        fail(ErrorCode::kQZeroWherePPositive,
             "Q(" + std::to_string(r) + "," + std::to_string(c) + ") < 1e-30 where P > 0");
      }
      gz(r, c) = logp(r, c) - logq(r, c);
      row_kl += p * gz(r, c);
    }
    for (std::size_t c = 0; c < z.cols(); ++c) {
      const double p = std::exp(logp(r, c));
      gz(r, c) = p == 0.0 ? 0.0 : p * (gz(r, c) - row_kl);
    }
    total += row_kl;
  }
  return record(Matrix::scalar(total), {logits}, [logits, gz = std::move(gz)](GradTape& t, const Matrix& g) {
    Matrix out = gz;
    for (double& v : out.values()) v *= g.item();
    t.accumulate(logits, out);
  });
}

}  // namespace cite
