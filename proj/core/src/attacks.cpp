#include "wavedef/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "wavedef/losses.hpp"
#include "wavedef/ops.hpp"
#include "wavedef/random.hpp"

namespace wavedef {

const char* attack_family_name(AttackFamily family) {
  switch (family) {
    case AttackFamily::Fgsm: return "fgsm";
    case AttackFamily::Pgd: return "pgd";
    case AttackFamily::Mifgsm: return "mifgsm";
    case AttackFamily::Bim: return "bim";
  }
  return "?";
}

AttackFamily attack_family_from_name(const std::string& name) {
  if (name == "fgsm") return AttackFamily::Fgsm;
  if (name == "pgd") return AttackFamily::Pgd;
  if (name == "mifgsm") return AttackFamily::Mifgsm;
  if (name == "bim") return AttackFamily::Bim;
  throw ValueError("unknown attack family '" + name + "'");
}

AttackSpec AttackSpec::normalized() const {
  AttackSpec s = *this;
  if (s.epsilon < 0.0) throw ValueError("attack epsilon must be >= 0");
  if (s.steps < 1) throw ValueError("attack steps must be >= 1");
  if (s.decay < 0.0) throw ValueError("attack decay must be >= 0");
  switch (s.family) {
    case AttackFamily::Fgsm:
      s.steps = 1;
      s.step_size = s.epsilon;
      s.random_start = false;
      s.decay = 0.0;
      break;
    case AttackFamily::Bim:
      s.random_start = false;
      [[fallthrough]];
    case AttackFamily::Pgd:
    case AttackFamily::Mifgsm:
      if (s.family == AttackFamily::Mifgsm) s.random_start = false;
      if (s.step_size < 0.0) s.step_size = s.epsilon / 4.0;
      break;
  }
  if (s.epsilon == 0.0) {
    s.step_size = 0.0;
  } else if (s.step_size <= 0.0 || s.step_size > s.epsilon) {
    throw ValueError("attack step size must satisfy 0 < alpha <= epsilon");
  }
  return s;
}

namespace {

// Temporarily marks the classifier parameters as non-differentiable so the
// attack's backward pass computes input gradients only. Restored on scope
// exit; attacks never mutate parameter values.
class ScopedParamFreeze {
 public:
  explicit ScopedParamFreeze(const Classifier& model)
      : params_(const_cast<Classifier&>(model).parameters()) {
    saved_.reserve(params_.size());
    for (auto& p : params_) {
      saved_.push_back(p.requires_grad());
      p.set_requires_grad(false);
    }
  }
  ~ScopedParamFreeze() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      params_[i].set_requires_grad(saved_[i]);
    }
  }

 private:
  std::vector<Tensor> params_;
  std::vector<bool> saved_;
};

// d(mean CE)/d(input) at the given pixel buffer. The classifier parameters
// are only read; the forward runs on a private tape.
std::vector<double> input_gradient(const Shape& shape, const std::vector<double>& pixels,
                                   const std::vector<int>& labels, const Classifier& model) {
  Tape tape;
  Tensor leaf = Tensor::from_data(shape, pixels, /*requires_grad=*/true);
  Tensor loss = cross_entropy_loss(model.forward(leaf), labels);
  auto grads = tape.backward_collect(loss, {leaf});
  if (grads[0].empty()) grads[0].assign(pixels.size(), 0.0);
  return std::move(grads[0]);
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void project_and_clip(std::vector<double>& cur, const std::vector<double>& origin,
                      double eps) {
  for (std::size_t i = 0; i < cur.size(); ++i) {
    const double lo = origin[i] - eps;
    const double hi = origin[i] + eps;
    double v = cur[i];
    v = std::min(std::max(v, lo), hi);
    cur[i] = std::min(std::max(v, 0.0), 1.0);
  }
}

Tensor iterate_attack(const Tensor& x, const std::vector<int>& labels,
                      const Classifier& model, const AttackSpec& raw_spec,
                      int64_t sample_index_base) {
  const AttackSpec spec = raw_spec.normalized();
  if (x.rank() != 4) throw ShapeError("attack input must be [B,C,H,W]");
  if (static_cast<int64_t>(labels.size()) != x.dim(0)) {
    throw ShapeError("attack label count mismatch");
  }
  ScopedParamFreeze freeze(model);
  const int64_t batch = x.dim(0);
  const int64_t per_sample = x.size() / batch;

  const std::vector<double> origin(x.data(), x.data() + x.size());
  std::vector<double> cur = origin;

  if (spec.random_start && spec.epsilon > 0.0) {
    for (int64_t i = 0; i < batch; ++i) {
      std::mt19937_64 rng(seed_stream(spec.seed, "pgd-start",
                                      static_cast<uint64_t>(sample_index_base + i)));
      std::uniform_real_distribution<double> dist(-spec.epsilon, spec.epsilon);
      double* s = cur.data() + i * per_sample;
      for (int64_t j = 0; j < per_sample; ++j) {
        s[j] = std::min(std::max(s[j] + dist(rng), 0.0), 1.0);
      }
    }
  }

  const bool momentum = spec.family == AttackFamily::Mifgsm;
  std::vector<double> acc;
  if (momentum) acc.assign(cur.size(), 0.0);

  for (int step = 0; step < spec.steps && spec.epsilon > 0.0; ++step) {
    std::vector<double> g = input_gradient(x.shape(), cur, labels, model);
    if (momentum) {
      for (int64_t i = 0; i < batch; ++i) {
        double* gs = g.data() + i * per_sample;
        double* as = acc.data() + i * per_sample;
        double l1 = 0.0;
        for (int64_t j = 0; j < per_sample; ++j) l1 += std::abs(gs[j]);
        if (l1 > 0.0) {
          const double inv = 1.0 / l1;
          for (int64_t j = 0; j < per_sample; ++j) as[j] = spec.decay * as[j] + gs[j] * inv;
        } else {
          // zero gradient: momentum only
          for (int64_t j = 0; j < per_sample; ++j) as[j] = spec.decay * as[j];
        }
      }
      for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += spec.step_size * sign(acc[j]);
    } else {
      for (std::size_t j = 0; j < cur.size(); ++j) cur[j] += spec.step_size * sign(g[j]);
    }
    project_and_clip(cur, origin, spec.epsilon);
  }
  if (spec.epsilon == 0.0) {
    project_and_clip(cur, origin, 0.0);
  }

  return Tensor::from_data(x.shape(), std::move(cur));
}

}  // namespace

Tensor run_attack(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
                  const AttackSpec& spec, int64_t sample_index_base) {
  return iterate_attack(x, labels, model, spec, sample_index_base);
}

Tensor fgsm(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
            const AttackSpec& spec) {
  AttackSpec s = spec;
  s.family = AttackFamily::Fgsm;
  return iterate_attack(x, labels, model, s, 0);
}

Tensor pgd(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
           const AttackSpec& spec, int64_t sample_index_base) {
  AttackSpec s = spec;
  s.family = AttackFamily::Pgd;
  return iterate_attack(x, labels, model, s, sample_index_base);
}

Tensor mifgsm(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
              const AttackSpec& spec, int64_t sample_index_base) {
  AttackSpec s = spec;
  s.family = AttackFamily::Mifgsm;
  return iterate_attack(x, labels, model, s, sample_index_base);
}

Tensor bim(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
           const AttackSpec& spec) {
  AttackSpec s = spec;
  s.family = AttackFamily::Bim;
  return iterate_attack(x, labels, model, s, 0);
}

}  // namespace wavedef
