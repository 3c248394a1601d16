#ifndef SDIT_ADAM_HPP
#define SDIT_ADAM_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "sdit/autodiff.hpp"

namespace sdit {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameters. Moment buffers are
/// aligned with the parameter list given at construction.
template <typename Scalar>
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Parameter<Scalar>*> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (const Parameter<Scalar>* p : params_) {
      first_.push_back(Tensor<Scalar>(p->value.shape));
      second_.push_back(Tensor<Scalar>(p->value.shape));
    }
  }

  /// p <- p - lr * m_hat / (sqrt(v_hat) + eps) using each parameter's grad.
  void step() {
    ++steps_;
    const double t = static_cast<double>(steps_);
    const Scalar b1 = Scalar(cfg_.beta1);
    const Scalar b2 = Scalar(cfg_.beta2);
    const Scalar c1 = Scalar(1.0 - std::pow(cfg_.beta1, t));
    const Scalar c2 = Scalar(1.0 - std::pow(cfg_.beta2, t));
    const Scalar lr = Scalar(cfg_.learning_rate);
    const Scalar eps = Scalar(cfg_.epsilon);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto g = params_[i]->grad.data.array();
      auto m = first_[i].data.array();
      auto v = second_[i].data.array();
      m = b1 * m + (Scalar(1) - b1) * g;
      v = b2 * v + (Scalar(1) - b2) * g.square();
      params_[i]->value.data.array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
    }
  }

  void zero_grad() {
    for (Parameter<Scalar>* p : params_) p->zero_grad();
  }

  const AdamConfig& config() const { return cfg_; }
  std::int64_t steps() const { return steps_; }
  std::vector<Tensor<Scalar>>& first_moments() { return first_; }
  std::vector<Tensor<Scalar>>& second_moments() { return second_; }
  const std::vector<Tensor<Scalar>>& first_moments() const { return first_; }
  const std::vector<Tensor<Scalar>>& second_moments() const { return second_; }
  void set_steps(std::int64_t s) { steps_ = s; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  AdamConfig cfg_;
  std::vector<Tensor<Scalar>> first_;
  std::vector<Tensor<Scalar>> second_;
  std::int64_t steps_ = 0;
};

}  // namespace sdit

#endif  // SDIT_ADAM_HPP
