#pragma once

#include "clinchlab/model.hpp"

namespace clinchlab {

/// Forward-Euler discretization of the divisible clinching dynamics with a
/// fixed step. It shares no code with the event-driven engine and exists to
/// cross-check it. A step that would straddle a valuation, an entry into the
/// clinching set or the stop is cut short to end on it, so the error stays
/// first order in dt instead of depending on where the grid falls.
///
/// Throws StepTooCoarse when the supply invariant drifts by more than
/// 10 * check_epsilon, InvalidStep when dt is not positive.
Outcome integrate_fixed_step(const Profile& profile, double dt, double check_epsilon = 1e-4);

}  // namespace clinchlab
