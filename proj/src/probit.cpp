#include "cospar/probit.hpp"

#include <cmath>

namespace cospar::probit {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// Phi(-x) / phi(x) for x >= 6 via Laplace's continued fraction
// 1 / (x + 1 / (x + 2 / (x + 3 / (x + ...)))), evaluated bottom-up.
double mills_ratio_tail(double x) noexcept {
    double tail = x;
    for (int k = 120; k >= 1; --k) tail = x + k / tail;
    return 1.0 / tail;
}

}  // namespace

double normal_pdf(double z) noexcept { return std::exp(-0.5 * z * z - kLogSqrt2Pi); }

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z * kInvSqrt2); }

double log_normal_cdf(double z) noexcept {
    if (z < kLowerTailSwitch) return -0.5 * z * z - kLogSqrt2Pi + std::log(mills_ratio_tail(-z));
    if (z > 5.0) return std::log1p(-0.5 * std::erfc(z * kInvSqrt2));
    return std::log(normal_cdf(z));
}

double inverse_mills(double z) noexcept {
    if (z < kLowerTailSwitch) return 1.0 / mills_ratio_tail(-z);
    return std::exp(-0.5 * z * z - kLogSqrt2Pi - log_normal_cdf(z));
}

}  // namespace cospar::probit
