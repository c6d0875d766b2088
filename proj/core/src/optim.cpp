#include "wavedef/optim.hpp"

#include <cmath>
#include <numbers>

namespace wavedef {

Adam::Adam(std::vector<Tensor> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(static_cast<std::size_t>(params_[i].size()), 0.0);
    v_[i].assign(static_cast<std::size_t>(params_[i].size()), 0.0);
  }
}

void Adam::step(double lr) {
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));

  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& param = params_[p];
    const bool has_grad = param.has_grad();
    const std::vector<double>* grad = has_grad ? &param.grad() : nullptr;
    double* data = param.data();
    auto& m = m_[p];
    auto& v = v_[p];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const double g = grad ? (*grad)[i] : 0.0;
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double mhat = m[i] / bias1;
      const double vhat = v[i] / bias2;
      data[i] -= lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double cosine_lr(double start, double end, int epoch, int total_epochs) {
  if (total_epochs <= 1) return start;
  const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  if (epoch <= 0) return start;
  if (epoch >= total_epochs - 1) return end;
  return end + 0.5 * (start - end) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace wavedef
