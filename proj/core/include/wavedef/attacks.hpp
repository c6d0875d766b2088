#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wavedef/classifier.hpp"
#include "wavedef/tensor.hpp"

namespace wavedef {

enum class AttackFamily { Fgsm, Pgd, Mifgsm, Bim };

const char* attack_family_name(AttackFamily family);
AttackFamily attack_family_from_name(const std::string& name);

/// Fully determines one perturbation procedure. normalized() applies the
/// family identities (FGSM is a single full-step attack without a random
/// start; BIM is PGD without a random start) and validates the fields.
struct AttackSpec {
  AttackFamily family = AttackFamily::Fgsm;
  double epsilon = 0.3;    // L-inf budget in pixel units
  int steps = 10;
  double step_size = -1.0; // < 0 selects the default (epsilon for FGSM, epsilon/4 otherwise)
  double decay = 1.0;      // momentum, MI-FGSM only
  bool random_start = true;  // PGD only
  uint64_t seed = 0;

  AttackSpec normalized() const;
};

/// Untargeted L-inf attack against the classifier's cross-entropy loss.
/// Outputs satisfy |x_adv - x|_inf <= epsilon and live in [0,1]. The
/// classifier parameters are read-only. `sample_index_base` offsets the
/// per-sample RNG streams so results do not depend on batching.
Tensor run_attack(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
                  const AttackSpec& spec, int64_t sample_index_base = 0);

Tensor fgsm(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
            const AttackSpec& spec);
Tensor pgd(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
           const AttackSpec& spec, int64_t sample_index_base = 0);
Tensor mifgsm(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
              const AttackSpec& spec, int64_t sample_index_base = 0);
Tensor bim(const Tensor& x, const std::vector<int>& labels, const Classifier& model,
           const AttackSpec& spec);

}  // namespace wavedef
