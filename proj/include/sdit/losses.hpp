#ifndef SDIT_LOSSES_HPP
#define SDIT_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "sdit/labels.hpp"
#include "sdit/ops.hpp"

// Objective terms for the translation model. Every loss reduces by the mean
// over batch and over patch grid or code dimensions.

namespace sdit {

enum class GanLossVariant {
  vanilla,             // log loss for D, non-saturating -log sigmoid(fake) for G
  vanilla_saturating,  // log loss for D, G minimizes log(1 - sigmoid(fake))
  hinge,
};

inline std::string to_string(GanLossVariant v) {
  switch (v) {
    case GanLossVariant::vanilla: return "vanilla";
    case GanLossVariant::vanilla_saturating: return "vanilla_saturating";
    case GanLossVariant::hinge: return "hinge";
  }
  return "vanilla";
}

inline GanLossVariant gan_loss_variant_from_string(const std::string& s) {
  if (s == "vanilla") return GanLossVariant::vanilla;
  if (s == "vanilla_saturating") return GanLossVariant::vanilla_saturating;
  if (s == "hinge") return GanLossVariant::hinge;
  throw ConfigError("unknown gan loss variant '" + s + "'");
}

/// Probabilities are clamped to [kLogFloor, 1 - kLogFloor] before the log.
inline constexpr double kLogFloor = 1e-8;

struct LossWeights {
  double gan = 10.0;
  double fake = 1.0;
  double real = 1.0;
  double latent = 10.0;
  double reconstruction = 800.0;

  void validate() const {
    if (gan < 0 || fake < 0 || real < 0 || latent < 0 || reconstruction < 0) {
      throw ConfigError("loss weights must be nonnegative");
    }
  }
  bool operator==(const LossWeights&) const = default;
};

/// Scalar values of every objective term for one step. Fields that a step
/// does not compute stay at zero.
struct LossBundle {
  double gan = 0;       // adversarial term of the step that produced the bundle
  double cls_fake = 0;
  double cls_real = 0;
  double latent = 0;
  double cycle = 0;
  double total_g = 0;
  double total_d = 0;

  bool all_finite() const {
    return std::isfinite(gan) && std::isfinite(cls_fake) && std::isfinite(cls_real) &&
           std::isfinite(latent) && std::isfinite(cycle) && std::isfinite(total_g) &&
           std::isfinite(total_d);
  }
};

template <typename T>
struct objective_scalar {
  using type = T;
};
template <typename Scalar>
struct objective_scalar<Var<Scalar>> {
  using type = Scalar;
};

/// lambda_GAN*gan + lambda_FAKE*cls_fake + lambda_LAT*latent + lambda_REC*cycle.
/// Works on doubles and on graph scalars alike.
template <typename T>
T generator_objective(const T& gan, const T& cls_fake, const T& latent, const T& cycle,
                      const LossWeights& w) {
  w.validate();
  using S = typename objective_scalar<T>::type;
  return gan * S(w.gan) + cls_fake * S(w.fake) + latent * S(w.latent) +
         cycle * S(w.reconstruction);
}

/// lambda_GAN*gan + lambda_REAL*cls_real + lambda_LAT*latent.
template <typename T>
T discriminator_objective(const T& gan, const T& cls_real, const T& latent, const LossWeights& w) {
  w.validate();
  using S = typename objective_scalar<T>::type;
  return gan * S(w.gan) + cls_real * S(w.real) + latent * S(w.latent);
}

inline double total_generator_loss(const LossBundle& b, const LossWeights& w) {
  return generator_objective(b.gan, b.cls_fake, b.latent, b.cycle, w);
}

inline double total_discriminator_loss(const LossBundle& b, const LossWeights& w) {
  return discriminator_objective(b.gan, b.cls_real, b.latent, w);
}

namespace detail {

template <typename Scalar>
void require_finite(const Var<Scalar>& v, const char* what) {
  if (!v.value().all_finite()) throw NumericError(std::string(what) + ": non-finite logits");
}

/// mean(-log p) with p = clamp(sigmoid(x)) when `positive`, else
/// mean(-log(1 - p)). Zero gradient where the clamp is active.
template <typename Scalar>
Var<Scalar> sigmoid_log_loss(Var<Scalar> logits, bool positive) {
  Graph<Scalar>& g = *logits.graph;
  const Index count = logits.value().size();
  const double lo = kLogFloor;
  const double hi = 1.0 - kLogFloor;
  double total = 0;
  const auto& x = logits.value().data;
  for (Index r = 0; r < x.rows(); ++r) {
    for (Index c = 0; c < x.cols(); ++c) {
      const double p = std::clamp(1.0 / (1.0 + std::exp(-double(x(r, c)))), lo, hi);
      total += positive ? -std::log(p) : -std::log1p(-p);
    }
  }
  Tensor<Scalar> out = Tensor<Scalar>::constant(Shape{1, 1, 1, 1}, Scalar(total / double(count)));
  return g.op(std::move(out), logits.requires_grad(),
              [&g, logits, positive, count, lo, hi](const Tensor<Scalar>& dy) {
                const Scalar scale = dy.data(0, 0) / Scalar(count);
                g.grad(logits.id).data += logits.value().data.unaryExpr([&](Scalar v) {
                  const double p = 1.0 / (1.0 + std::exp(-double(v)));
                  if (p < lo || p > hi) return Scalar(0);
                  return Scalar(positive ? p - 1.0 : p) * scale;
                });
              });
}

/// mean(relu(margin + sign * x)).
template <typename Scalar>
Var<Scalar> hinge_term(Var<Scalar> logits, Scalar sign) {
  Graph<Scalar>& g = *logits.graph;
  const Index count = logits.value().size();
  const auto v = (Scalar(1) + sign * logits.value().data.array()).cwiseMax(Scalar(0));
  Tensor<Scalar> out = Tensor<Scalar>::constant(Shape{1, 1, 1, 1}, v.sum() / Scalar(count));
  return g.op(std::move(out), logits.requires_grad(),
              [&g, logits, sign, count](const Tensor<Scalar>& dy) {
                const Scalar scale = dy.data(0, 0) / Scalar(count);
                g.grad(logits.id).data += logits.value().data.unaryExpr([&](Scalar v) {
                  return Scalar(1) + sign * v > Scalar(0) ? sign * scale : Scalar(0);
                });
              });
}

}  // namespace detail

/// Discriminator adversarial loss. Vanilla form:
/// -mean(log sigmoid(real)) - mean(log(1 - sigmoid(fake))).
template <typename Scalar>
Var<Scalar> adversarial_d_loss(Var<Scalar> src_real, Var<Scalar> src_fake,
                               GanLossVariant variant = GanLossVariant::vanilla) {
  detail::require_finite(src_real, "adversarial_d_loss");
  detail::require_finite(src_fake, "adversarial_d_loss");
  if (variant == GanLossVariant::hinge) {
    return detail::hinge_term(src_real, Scalar(-1)) + detail::hinge_term(src_fake, Scalar(1));
  }
  return detail::sigmoid_log_loss(src_real, true) + detail::sigmoid_log_loss(src_fake, false);
}

/// Generator adversarial loss; -mean(log sigmoid(fake)) by default.
template <typename Scalar>
Var<Scalar> adversarial_g_loss(Var<Scalar> src_fake,
                               GanLossVariant variant = GanLossVariant::vanilla) {
  detail::require_finite(src_fake, "adversarial_g_loss");
  switch (variant) {
    case GanLossVariant::hinge: return mean_all(src_fake) * Scalar(-1);
    case GanLossVariant::vanilla_saturating:
      return detail::sigmoid_log_loss(src_fake, false) * Scalar(-1);
    case GanLossVariant::vanilla: break;
  }
  return detail::sigmoid_log_loss(src_fake, true);
}

/// Mean softmax cross-entropy of (n, 1, 1, C) logits against labels.
template <typename Scalar>
Var<Scalar> classification_loss(Var<Scalar> logits, std::span<const DomainLabel> labels) {
  detail::require_finite(logits, "classification_loss");
  const Shape s = logits.shape();
  if (s.h != 1 || s.w != 1) throw DomainError("classification_loss: logits must be (n,1,1,C)");
  if (static_cast<Index>(labels.size()) != s.n) {
    throw DomainError("classification_loss: label count != batch size");
  }
  validate_labels(labels, static_cast<int>(s.c));
  Graph<Scalar>& g = *logits.graph;
  RowMatrix<Scalar> softmax(s.n, s.c);
  double total = 0;
  for (Index i = 0; i < s.n; ++i) {
    const auto row = logits.value().data.row(i);
    const Scalar m = row.maxCoeff();
    const auto shifted = (row.array() - m);
    const Scalar lse = std::log(shifted.exp().sum());
    softmax.row(i) = (shifted - lse).exp().matrix();
    total += double(lse - shifted(labels[i].zero_based()));
  }
  std::vector<int> idx;
  for (const DomainLabel& l : labels) idx.push_back(l.zero_based());
  Tensor<Scalar> out = Tensor<Scalar>::constant(Shape{1, 1, 1, 1}, Scalar(total / double(s.n)));
  return g.op(std::move(out), logits.requires_grad(),
              [&g, logits, softmax = std::move(softmax), idx = std::move(idx)](
                  const Tensor<Scalar>& dy) {
                RowMatrix<Scalar> d = softmax;
                for (Index i = 0; i < d.rows(); ++i) d(i, idx[i]) -= Scalar(1);
                g.grad(logits.id).data += d * (dy.data(0, 0) / Scalar(d.rows()));
              });
}

/// Domain classification loss on generated images against target labels.
template <typename Scalar>
Var<Scalar> cls_fake_loss(Var<Scalar> cls_logits_fake, std::span<const DomainLabel> target) {
  return classification_loss(cls_logits_fake, target);
}

/// Domain classification loss on real images against source labels.
template <typename Scalar>
Var<Scalar> cls_real_loss(Var<Scalar> cls_logits_real, std::span<const DomainLabel> source) {
  return classification_loss(cls_logits_real, source);
}

/// mean(|a - b|) over all elements.
template <typename Scalar>
Var<Scalar> l1_loss(Var<Scalar> a, Var<Scalar> b) {
  require_same_shape(a.shape(), b.shape(), "l1_loss");
  detail::require_finite(a, "l1_loss");
  detail::require_finite(b, "l1_loss");
  Graph<Scalar>& g = *a.graph;
  const Index count = a.value().size();
  const Scalar value = (a.value().data - b.value().data).cwiseAbs().sum() / Scalar(count);
  Tensor<Scalar> out = Tensor<Scalar>::constant(Shape{1, 1, 1, 1}, value);
  return g.op(std::move(out), a.requires_grad() || b.requires_grad(),
              [&g, a, b, count](const Tensor<Scalar>& dy) {
                const RowMatrix<Scalar> sign =
                    (a.value().data - b.value().data).array().sign().matrix() *
                    (dy.data(0, 0) / Scalar(count));
                if (a.requires_grad()) g.grad(a.id).data += sign;
                if (b.requires_grad()) g.grad(b.id).data -= sign;
              });
}

/// Latent reconstruction loss, mean |F_rec(y) - z|. Applied to generated
/// samples only.
template <typename Scalar>
Var<Scalar> latent_rec_loss(Var<Scalar> rec_code, Var<Scalar> z) {
  if (!(rec_code.shape() == z.shape())) {
    throw DomainError("latent_rec_loss: code length mismatch " + to_string(rec_code.shape()) +
                      " vs " + to_string(z.shape()));
  }
  return l1_loss(rec_code, z);
}

/// Cycle reconstruction loss, mean |x - x_rec|.
template <typename Scalar>
Var<Scalar> cycle_loss(Var<Scalar> x, Var<Scalar> x_rec) {
  if (!(x.shape() == x_rec.shape())) {
    throw DomainError("cycle_loss: image shape mismatch " + to_string(x.shape()) + " vs " +
                      to_string(x_rec.shape()));
  }
  return l1_loss(x, x_rec);
}

}  // namespace sdit

#endif  // SDIT_LOSSES_HPP
