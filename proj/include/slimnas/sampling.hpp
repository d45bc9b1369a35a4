#pragma once

#include <cstdint>
#include <string>

#include "slimnas/archspace.hpp"
#include "slimnas/costmodel.hpp"

namespace slimnas {

namespace detail {

// Tracks which constraint axis rejected the most samples, for error reporting.
struct ViolationTally {
  uint64_t params_hits = 0;
  uint64_t flops_hits = 0;

  void record(const ResourceCost& cost, const HardwareConstraints& c) {
    if (c.max_params && cost.params > *c.max_params) ++params_hits;
    if (c.max_flops && cost.flops > *c.max_flops) ++flops_hits;
  }

  std::string tightest(const HardwareConstraints& c) const {
    if (params_hits >= flops_hits && c.max_params)
      return "max_params=" + std::to_string(*c.max_params) + " (violated " +
             std::to_string(params_hits) + " times)";
    if (c.max_flops)
      return "max_flops=" + std::to_string(*c.max_flops) + " (violated " +
             std::to_string(flops_hits) + " times)";
    return "none";
  }
};

}  // namespace detail

// Rejection sampling: independent uniform factor per searchable layer,
// redrawn until the analytic cost satisfies the constraints. Unbiased within
// the feasible set; the retry cap turns pathological constraints into an
// explicit error naming the tightest-violated constraint.
inline ArchConfig sample_random(const BackboneSkeleton& skeleton, const HardwareConstraints& constraints,
                                Rng& rng, int max_retries) {
  if (max_retries < 1) throw ConfigError("max_retries must be positive");
  detail::ViolationTally tally;
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    ArchConfig config = random_config(skeleton, rng);
    const ResourceCost cost = evaluate_cost(skeleton, config);
    if (satisfies(cost, constraints)) return config;
    tally.record(cost, constraints);
  }
  throw InfeasibleError("no feasible architecture after " + std::to_string(max_retries) +
                        " samples; tightest constraint: " + tally.tightest(constraints));
}

}  // namespace slimnas
