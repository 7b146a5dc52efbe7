#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They share no code with the library beyond the public data types:
// the objective is evaluated straight from its definition with std::erfc and
// a dense inverse, and the minimizer is plain gradient descent.

#include "cospar/objective.hpp"
#include "cospar/preference_model.hpp"

#include <Eigen/LU>

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace cospar::oracle {

inline double phi(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }
inline double cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double scale_of(const PreferenceRecord& r, double sigma) {
    return 1.0 / (std::sqrt(2.0) * sigma / std::sqrt(r.weight));
}

inline Matrix se_kernel(const std::vector<std::vector<double>>& points, const KernelParams& k) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Matrix out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            double r2 = 0.0;
            for (std::size_t d = 0; d < points[0].size(); ++d) {
                const double diff = (points[i][d] - points[j][d]) / k.lengthscales[d];
                r2 += diff * diff;
            }
            out(i, j) = k.signal_variance * std::exp(-0.5 * r2) + (i == j ? k.noise_variance : 0.0);
        }
    return out;
}

inline double objective(const Vector& f, const Matrix& prior_inverse, const PreferenceDataset& data,
                        double sigma) {
    double s = 0.5 * f.dot(prior_inverse * f);
    for (const auto& r : data) s -= std::log(cdf(scale_of(r, sigma) * (f[r.winner] - f[r.loser])));
    return s;
}

inline Vector gradient(const Vector& f, const Matrix& prior_inverse, const PreferenceDataset& data,
                       double sigma) {
    Vector g = prior_inverse * f;
    for (const auto& r : data) {
        const double c = scale_of(r, sigma);
        const double z = c * (f[r.winner] - f[r.loser]);
        const double ratio = phi(z) / cdf(z);
        g[r.winner] -= c * ratio;
        g[r.loser] += c * ratio;
    }
    return g;
}

// Gradient descent with Barzilai-Borwein steps and an Armijo safeguard.
inline Vector minimize(const Matrix& prior_cov, const PreferenceDataset& data, double sigma,
                       double tolerance = 1e-11, int max_iterations = 2'000'000) {
    const Matrix prior_inverse = prior_cov.fullPivLu().inverse();
    Vector f = Vector::Zero(prior_cov.rows());
    Vector g = gradient(f, prior_inverse, data, sigma);
    double step = 1e-3;
    for (int it = 0; it < max_iterations && g.lpNorm<Eigen::Infinity>() > tolerance; ++it) {
        const double value = objective(f, prior_inverse, data, sigma);
        double t = step;
        Vector next = f - t * g;
        while (objective(next, prior_inverse, data, sigma) > value - 1e-4 * t * g.squaredNorm() && t > 1e-300) {
            t *= 0.5;
            next = f - t * g;
        }
        const Vector g_next = gradient(next, prior_inverse, data, sigma);
        const Vector s = next - f;
        const Vector y = g_next - g;
        const double sy = s.dot(y);
        step = sy > 0.0 ? s.squaredNorm() / sy : 1e-3;
        f = next;
        g = g_next;
    }
    return f;
}

// Central differences of a scalar function.
template <typename F>
Vector finite_gradient(const F& fn, const Vector& x, double h) {
    Vector out(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Vector up = x, down = x;
        up[i] += h;
        down[i] -= h;
        out[i] = (fn(up) - fn(down)) / (2.0 * h);
    }
    return out;
}

inline double relative_error(const Matrix& got, const Matrix& want) {
    return (got - want).norm() / std::max(1.0, want.norm());
}

// Random well-posed instance: 1D points in [0, 1], A actions, N records.
struct Instance {
    ActionSpace space;
    KernelParams kernel;
    PreferenceDataset data;
};

inline Instance random_instance(std::mt19937_64& rng, std::size_t max_actions, std::size_t max_records) {
    std::uniform_int_distribution<std::size_t> actions(2, max_actions);
    std::uniform_int_distribution<std::size_t> records(0, max_records);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto a = actions(rng);
    Instance out{build_action_grid({{"x", 0.0, 1.0, a, ""}}),
                 {{0.3 + 0.7 * unit(rng)}, 0.5 + 1.5 * unit(rng), 1e-3 + 1e-2 * unit(rng), 0.2 + 0.8 * unit(rng)},
                 {}};
    std::uniform_int_distribution<std::size_t> pick(0, a - 1);
    const auto n = records(rng);
    while (out.data.size() < n) {
        const auto w = pick(rng), l = pick(rng);
        if (w == l) continue;
        out.data.push_back({w, l, unit(rng) < 0.3 ? 0.5 : 1.0, FeedbackSource::pairwise});
    }
    return out;
}

// Plain Self-Sparring: n posterior samples, argmax each, noise-free pairwise
// comparisons among them, batch refit. No buffer, no coactive feedback, no
// FeedbackBundle. Returns the executed actions in order.
inline std::vector<ActionIndex> self_sparring_trace(const ObjectiveTable& objective, const KernelParams& kernel,
                                                    std::size_t n, std::size_t iterations, std::uint64_t seed) {
    const PreferenceModel model(objective.space, kernel);
    Rng rng(seed);
    PreferenceDataset data;
    std::vector<ActionIndex> trace;
    for (std::size_t t = 0; t < iterations; ++t) {
        const auto fit = model.fit(data);
        std::vector<ActionIndex> chosen;
        for (std::size_t j = 0; j < n; ++j) chosen.push_back(argmax(model.sample(fit, rng)));
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) {
                const double a = objective.values[static_cast<Eigen::Index>(chosen[j])];
                const double b = objective.values[static_cast<Eigen::Index>(chosen[k])];
                if (a > b) data.push_back({chosen[j], chosen[k], 1.0, FeedbackSource::pairwise});
                if (b > a) data.push_back({chosen[k], chosen[j], 1.0, FeedbackSource::pairwise});
            }
        trace.insert(trace.end(), chosen.begin(), chosen.end());
    }
    return trace;
}

// 5 x 5 bowl f(x, y) = -(x - 1)^2 - 1.5 (y - 2)^2 on {0..4}^2. Gradients are
// exact for quadratics: gx = -2(x - 1), gy = -3(y - 2).
//   |gx| by x: 2 0 2 4 6   -> p50 = 2, p75 = 4
//   |gy| by y: 6 3 0 3 6   -> p50 = 3, p75 = 6
// Enumerated by hand: "-" is no feedback, otherwise dimension, sign, level.
// Ties in magnitude go to x.
inline ObjectiveTable bowl_objective() {
    ObjectiveTable t{build_action_grid({{"x", 0.0, 4.0, 5, ""}, {"y", 0.0, 4.0, 5, ""}}), Vector(25)};
    for (ActionIndex a = 0; a < 25; ++a) {
        const auto c = t.space.coordinates(a);
        t.values[static_cast<Eigen::Index>(a)] = -(c[0] - 1.0) * (c[0] - 1.0) - 1.5 * (c[1] - 2.0) * (c[1] - 2.0);
    }
    return t;
}

inline const char* const kBowlExpected[5][5] = {
    // y=0    y=1    y=2    y=3    y=4
    {"y+1", "-", "-", "-", "y-1"},          // x=0
    {"y+1", "-", "-", "-", "y-1"},          // x=1
    {"y+1", "-", "-", "-", "y-1"},          // x=2
    {"y+1", "x-1", "x-1", "x-1", "y-1"},    // x=3
    {"x-2", "x-2", "x-2", "x-2", "x-2"},    // x=4
};

inline std::string describe(const std::optional<CoactiveLevels>& levels) {
    if (!levels) return "-";
    for (std::size_t d = 0; d < levels->size(); ++d) {
        const int l = (*levels)[d];
        if (l == 0) continue;
        return std::string(1, "xy"[d]) + (l > 0 ? "+" : "-") + std::to_string(std::abs(l));
    }
    return "0";
}

}  // namespace cospar::oracle
