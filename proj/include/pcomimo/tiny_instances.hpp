#pragma once

#include "pcomimo/oracle.hpp"

namespace pcomimo {

/// Decomposition check bed: zero circuit power, exact CSIT, asymmetric users,
/// one action with cross-BS common power on each side.
TinyInstance make_lemma2_instance();

/// Same bed with circuit power switched on (used to report the decomposition
/// gap, no pass/fail).
TinyInstance make_lemma2_instance_pcct(double p_cct);

/// Duality-gap bed: binary queues, two channel states, on/off actions. The
/// power budgets sit on a consumption level achievable by a deterministic
/// policy, so the constrained optimum is attained without randomization.
TinyInstance make_duality_instance();

/// Noisy-CSIT bed for the per-flow learning convergence check.
TinyInstance make_fixedpoint_instance();

}  // namespace pcomimo
