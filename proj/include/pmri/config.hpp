#pragma once

#include <cstdint>
#include <string>

#include "pmri/common.hpp"

namespace pmri {

/// Run parameters shared by the solvers, the unrolled network and the
/// training loop. The on-disk form is a flat JSON object; keys and
/// defaults are documented in the README. Missing keys take the
/// defaults below; unknown keys are rejected.
struct RunConfig {
  int patch_size = 8;        // patch side length M
  int patch_stride = 4;
  double lambda = 100.0;     // regularization weight
  int unroll_iters = 3;      // unroll count K
  double alpha = 1e-4;       // segmentation loss weight
  double eps_initial_scale = 0.01;   // eps0 = scale * sigma1^2
  double eps_min_scale = 1e-8;       // floor = scale * eps0
  double cg_tol = 1e-8;
  int cg_max_iters = 200;
  double learning_rate = 1e-4;
  int epochs = 300;
  uint64_t seed = 0;
  double labelled_fraction = 1.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int net_width1 = 16;
  int net_width2 = 32;
  int net_width3 = 64;
  double rank_threshold = 1e-3;

  void validate() const;
  std::string to_json() const;
};

/// Parses a JSON config file. An empty (or whitespace-only) file yields
/// all defaults. Malformed values and invariant violations raise
/// config_error naming the offending key.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);

}  // namespace pmri
