#pragma once

// Built-in property checks shared by the selftest command, the acceptance
// binary and the unit tests.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "imfvqa/training.hpp"

namespace imfvqa::selftest {

/// Small model for gradient checks: every dimension is at most 8 and every
/// component (both encoders, both heads, projector with a hidden layer,
/// attention, feed-forward, output head) is present.
training::TrainConfig tiny_config();

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t coordinates = 0;
};

/// Analytic gradients of total_loss against central differences with fixed
/// dropout and noise draws, over every named parameter.
GradCheck gradient_check(std::uint64_t seed, double h = 1e-5);

struct KlCheck {
  double worst_z = 0.0;  // largest |closed - mc| / standard error
  std::size_t gaussians = 0;
  bool golden_ok = false;  // exact closed-form values
};

/// Closed-form KL against Monte-Carlo estimates of E_q[log q − log p].
KlCheck kl_oracle(std::uint64_t seed, std::size_t gaussians = 20, std::size_t samples = 1000000);

struct SamplingCheck {
  double worst_mean_z = 0.0;       // |mean − μ| / (σ/√N), pass below 4
  double worst_var_ratio_dev = 0.0;  // |var/σ² − 1|, pass below 0.05
  bool zero_eps_exact = false;
};

SamplingCheck sampling_statistics(std::uint64_t seed, std::size_t samples = 100000);

/// Generates a corpus from random scenes, then checks encode/decode and
/// regeneration are identical and hop counts match provenance sizes.
struct QaCheck {
  std::size_t scenes = 0;
  std::size_t pairs = 0;
  bool round_trip = false;
  bool deterministic = false;
  bool hops_consistent = false;
};

QaCheck qa_round_trip(std::uint64_t seed, std::size_t scenes = 25);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

/// Runs every suite; `report` receives each result as it completes.
std::vector<CheckResult> run_all(std::uint64_t seed, const std::function<void(const CheckResult&)>& report = {});

}  // namespace imfvqa::selftest
