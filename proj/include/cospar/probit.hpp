#pragma once

// Standard normal helpers used by the probit preference likelihood. All of
// them stay finite and accurate far into the lower tail.

namespace cospar::probit {

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;
double log_normal_cdf(double z) noexcept;
/// phi(z) / Phi(z). Positive for every finite z, approaching -z as z -> -inf.
double inverse_mills(double z) noexcept;

/// Below this argument the Mills ratio continued fraction replaces erfc.
inline constexpr double kLowerTailSwitch = -6.0;

}  // namespace cospar::probit
