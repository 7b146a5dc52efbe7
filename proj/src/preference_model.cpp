#include "cospar/preference_model.hpp"

#include "cospar/errors.hpp"
#include "cospar/probit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cospar {
namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

constexpr int kMaxNewtonIterations = 100;
constexpr int kMaxStepHalvings = 20;
constexpr double kGradientTolerance = 1e-6;

// A record rewritten against positions in some index space, with its
// precomputed 1 / (sqrt(2) sigma_k).
struct ScaledRecord {
    Eigen::Index winner;
    Eigen::Index loser;
    double scale;
};

std::vector<ScaledRecord> scale_records(const PreferenceDataset& data, const KernelParams& kernel) {
    std::vector<ScaledRecord> out;
    out.reserve(data.size());
    for (const auto& r : data)
        out.push_back({static_cast<Eigen::Index>(r.winner), static_cast<Eigen::Index>(r.loser),
                       1.0 / (kSqrt2 * record_noise(kernel.preference_noise, r.weight))});
    return out;
}

double likelihood_term(const Vector& f, const std::vector<ScaledRecord>& records) {
    double total = 0.0;
    for (const auto& r : records) total -= probit::log_normal_cdf(r.scale * (f[r.winner] - f[r.loser]));
    return total;
}

void add_likelihood_gradient(const Vector& f, const std::vector<ScaledRecord>& records, Vector& grad) {
    for (const auto& r : records) {
        const double g = r.scale * probit::inverse_mills(r.scale * (f[r.winner] - f[r.loser]));
        grad[r.winner] -= g;
        grad[r.loser] += g;
    }
}

void add_likelihood_curvature(const Vector& f, const std::vector<ScaledRecord>& records, Matrix& h) {
    for (const auto& r : records) {
        const double z = r.scale * (f[r.winner] - f[r.loser]);
        const double ratio = probit::inverse_mills(z);
        const double lambda = r.scale * r.scale * ratio * (z + ratio);
        h(r.winner, r.winner) += lambda;
        h(r.loser, r.loser) += lambda;
        h(r.winner, r.loser) -= lambda;
        h(r.loser, r.winner) -= lambda;
    }
}

Matrix inverse_from(const JitteredCholesky& chol, Eigen::Index n) {
    Matrix inv = chol.llt.solve(Matrix::Identity(n, n));
    return 0.5 * (inv + inv.transpose());
}

void check_shapes(const Vector& f, const Matrix& prior_cov, const PreferenceDataset& data) {
    if (prior_cov.rows() != prior_cov.cols() || prior_cov.rows() != f.size())
        throw ConfigError("utility vector and prior covariance sizes differ");
    validate_dataset(data, static_cast<std::size_t>(f.size()));
}

struct NewtonResult {
    Vector u;
    int iterations;
    double gradient_norm;
};

// Minimizes S(L u) = 1/2 u'u - sum ln Phi(z_k) from u = 0, where L L' is the
// prior covariance. The whitened Hessian I + L' W L has eigenvalues >= 1, so
// the solve stays well conditioned however small the prior jitter is.
NewtonResult newton_minimize(const Matrix& factor, const std::vector<ScaledRecord>& records) {
    const Eigen::Index n = factor.rows();
    const auto lower = factor.triangularView<Eigen::Lower>();
    auto objective = [&](const Vector& u) {
        const Vector f = lower * u;
        return 0.5 * u.squaredNorm() + likelihood_term(f, records);
    };
    auto gradient = [&](const Vector& u, const Vector& f) {
        Vector g = Vector::Zero(n);
        add_likelihood_gradient(f, records, g);
        return Vector(u + factor.transpose() * g);
    };

    Vector u = Vector::Zero(n);
    double value = objective(u);
    double gradient_norm = 0.0;
    for (int iteration = 0; iteration < kMaxNewtonIterations; ++iteration) {
        const Vector f = lower * u;
        const Vector grad = gradient(u, f);
        gradient_norm = grad.lpNorm<Eigen::Infinity>();
        if (gradient_norm < kGradientTolerance) return {std::move(u), iteration, gradient_norm};

        Matrix curvature = Matrix::Zero(n, n);
        add_likelihood_curvature(f, records, curvature);
        Matrix hessian = factor.transpose() * curvature * factor;
        hessian.diagonal().array() += 1.0;
        const auto chol = factorize_with_jitter(hessian, "Newton Hessian");
        const Vector direction = -chol.llt.solve(grad);
        const double slope = grad.dot(direction);

        double step = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= kMaxStepHalvings; ++halving, step *= 0.5) {
            Vector candidate = u + step * direction;
            const double candidate_value = objective(candidate);
            if (candidate_value < value) {
                u = std::move(candidate);
                value = candidate_value;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No representable decrease left: the Newton decrement is at the
            // rounding floor of S, so the current point is the minimizer.
            if (-slope <= 1e-13 * (1.0 + std::abs(value))) return {std::move(u), iteration, gradient_norm};
            throw NumericalError("Newton line search failed to decrease the objective", gradient_norm);
        }
    }
    gradient_norm = gradient(u, lower * u).lpNorm<Eigen::Infinity>();
    if (gradient_norm < kGradientTolerance) return {std::move(u), kMaxNewtonIterations, gradient_norm};
    throw NumericalError("Newton iteration did not converge within " +
                             std::to_string(kMaxNewtonIterations) + " iterations",
                         gradient_norm);
}

}  // namespace

void KernelParams::validate(std::size_t dimensionality) const {
    if (lengthscales.size() != dimensionality)
        throw ConfigError("kernel has " + std::to_string(lengthscales.size()) +
                          " lengthscales for a " + std::to_string(dimensionality) +
                          "-dimensional action space");
    for (std::size_t d = 0; d < lengthscales.size(); ++d)
        if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d]))
            throw ConfigError("lengthscale " + std::to_string(d) + " must be positive");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
        throw ConfigError("signal_variance must be positive");
    if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
        throw ConfigError("noise_variance must be non-negative");
    if (!(preference_noise > 0.0) || !std::isfinite(preference_noise))
        throw ConfigError("preference_noise must be positive");
}

void validate_dataset(const PreferenceDataset& data, std::size_t action_count) {
    for (std::size_t k = 0; k < data.size(); ++k) {
        const auto& r = data[k];
        const auto where = "record " + std::to_string(k);
        if (r.winner >= action_count || r.loser >= action_count)
            throw ConfigError(where + ": action index out of range");
        if (r.winner == r.loser) throw ConfigError(where + ": winner equals loser");
        if (!(r.weight > 0.0) || !std::isfinite(r.weight))
            throw ConfigError(where + ": weight must be positive");
    }
}

Matrix prior_covariance(const ActionSpace& space, const KernelParams& kernel) {
    kernel.validate(space.dimensionality());
    const auto a = static_cast<Eigen::Index>(space.size());
    const auto d = space.dimensionality();
    Matrix points(a, static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < a; ++i) {
        const auto x = space.coordinates(static_cast<ActionIndex>(i));
        for (std::size_t k = 0; k < d; ++k)
            points(i, static_cast<Eigen::Index>(k)) = x[k] / kernel.lengthscales[k];
    }
    Matrix cov(a, a);
    for (Eigen::Index i = 0; i < a; ++i) {
        cov(i, i) = kernel.signal_variance + kernel.noise_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double sq = (points.row(i) - points.row(j)).squaredNorm();
            cov(i, j) = cov(j, i) = kernel.signal_variance * std::exp(-0.5 * sq);
        }
    }
    return cov;
}

double record_noise(double preference_noise, double weight) {
    if (!(preference_noise > 0.0)) throw ConfigError("preference noise must be positive");
    if (!(weight > 0.0)) throw ConfigError("record weight must be positive");
    return preference_noise / std::sqrt(weight);
}

double pair_likelihood(double f_winner, double f_loser, double sigma_k) {
    if (!(sigma_k > 0.0)) throw ConfigError("sigma_k must be positive");
    return probit::normal_cdf((f_winner - f_loser) / (kSqrt2 * sigma_k));
}

double negative_log_posterior(const Vector& f, const PreferenceDataset& data,
                              const Matrix& prior_cov, const KernelParams& kernel) {
    check_shapes(f, prior_cov, data);
    const auto chol = factorize_with_jitter(prior_cov, "prior covariance");
    return 0.5 * f.dot(chol.llt.solve(f)) + likelihood_term(f, scale_records(data, kernel));
}

Vector nlp_gradient(const Vector& f, const PreferenceDataset& data, const Matrix& prior_cov,
                    const KernelParams& kernel) {
    check_shapes(f, prior_cov, data);
    const auto chol = factorize_with_jitter(prior_cov, "prior covariance");
    Vector grad = chol.llt.solve(f);
    add_likelihood_gradient(f, scale_records(data, kernel), grad);
    return grad;
}

Matrix nlp_hessian(const Vector& f, const PreferenceDataset& data, const Matrix& prior_cov,
                   const KernelParams& kernel) {
    check_shapes(f, prior_cov, data);
    const auto chol = factorize_with_jitter(prior_cov, "prior covariance");
    Matrix h = inverse_from(chol, f.size());
    add_likelihood_curvature(f, scale_records(data, kernel), h);
    return h;
}

Matrix likelihood_curvature(const Vector& f, const PreferenceDataset& data,
                            const KernelParams& kernel) {
    validate_dataset(data, static_cast<std::size_t>(f.size()));
    Matrix h = Matrix::Zero(f.size(), f.size());
    add_likelihood_curvature(f, scale_records(data, kernel), h);
    return h;
}

JitteredCholesky factorize_with_jitter(const Matrix& m, std::string_view what) {
    if (m.rows() != m.cols()) throw ConfigError(std::string(what) + " is not square");
    JitteredCholesky out;
    if (m.rows() == 0) return out;
    if (!m.allFinite()) throw NumericalError(std::string(what) + " has non-finite entries");
    out.llt.compute(m);
    if (out.llt.info() == Eigen::Success) return out;

    const double mean_diagonal = m.trace() / static_cast<double>(m.rows());
    const double scale = mean_diagonal > 0.0 ? mean_diagonal : 1.0;
    for (double factor = 1e-10; factor <= 1e-4 * (1.0 + 1e-9); factor *= 10.0) {
        Matrix jittered = m;
        jittered.diagonal().array() += factor * scale;
        out.llt.compute(jittered);
        if (out.llt.info() == Eigen::Success) {
            out.jitter = factor * scale;
            return out;
        }
    }
    throw NumericalError("Cholesky factorization of " + std::string(what) +
                         " failed after jitter escalation");
}

PreferenceModel::PreferenceModel(ActionSpace space, KernelParams kernel)
    : space_(std::move(space)), kernel_(std::move(kernel)) {
    prior_ = cospar::prior_covariance(space_, kernel_);
    prior_factor_ = factorize_with_jitter(prior_, "prior covariance").lower();
}

LaplaceFit PreferenceModel::fit(const PreferenceDataset& data) const {
    const auto a = static_cast<Eigen::Index>(space_.size());
    validate_dataset(data, space_.size());

    LaplaceFit out;
    for (const auto& r : data) {
        out.support.push_back(r.winner);
        out.support.push_back(r.loser);
    }
    std::sort(out.support.begin(), out.support.end());
    out.support.erase(std::unique(out.support.begin(), out.support.end()), out.support.end());
    const auto m = static_cast<Eigen::Index>(out.support.size());
    if (m == 0) {
        out.mean = Vector::Zero(a);
        out.whitened_cross = Matrix::Zero(0, a);
        return out;
    }

    std::vector<Eigen::Index> local(space_.size(), -1);
    for (Eigen::Index i = 0; i < m; ++i) local[out.support[static_cast<std::size_t>(i)]] = i;
    auto records = scale_records(data, kernel_);
    for (auto& r : records) {
        r.winner = local[static_cast<std::size_t>(r.winner)];
        r.loser = local[static_cast<std::size_t>(r.loser)];
    }

    Matrix support_prior(m, m);
    Matrix cross(m, a);
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto gi = static_cast<Eigen::Index>(out.support[static_cast<std::size_t>(i)]);
        cross.row(i) = prior_.row(gi);
        for (Eigen::Index j = 0; j < m; ++j)
            support_prior(i, j) = prior_(gi, static_cast<Eigen::Index>(out.support[static_cast<std::size_t>(j)]));
    }
    out.support_factor = factorize_with_jitter(support_prior, "prior covariance").lower();
    const auto lower = out.support_factor.triangularView<Eigen::Lower>();

    auto newton = newton_minimize(out.support_factor, records);
    out.whitened_mean = std::move(newton.u);
    out.support_mean = lower * out.whitened_mean;
    out.newton_iterations = newton.iterations;
    out.gradient_norm = newton.gradient_norm;

    Matrix curvature = Matrix::Zero(m, m);
    add_likelihood_curvature(out.support_mean, records, curvature);
    Matrix precision = out.support_factor.transpose() * curvature * out.support_factor;
    precision.diagonal().array() += 1.0;
    out.precision_factor = factorize_with_jitter(precision, "posterior precision").lower();

    // C_V = L B^-1 L' with B = R R'.
    const Matrix spread = out.precision_factor.triangularView<Eigen::Lower>().solve(out.support_factor.transpose());
    out.support_covariance = spread.transpose() * spread;

    out.whitened_cross = lower.solve(cross);
    out.mean = out.whitened_cross.transpose() * out.whitened_mean;
    for (Eigen::Index i = 0; i < m; ++i)
        out.mean[static_cast<Eigen::Index>(out.support[static_cast<std::size_t>(i)])] = out.support_mean[i];
    return out;
}

// K - Q' (I - B^-1) Q = K - Q'Q + S'S with S = R^-1 Q.
UtilityPosterior PreferenceModel::posterior(const LaplaceFit& fit) const {
    UtilityPosterior out{fit.mean, prior_};
    if (fit.support.empty()) return out;
    const Matrix& q = fit.whitened_cross;
    const Matrix s = fit.precision_factor.triangularView<Eigen::Lower>().solve(q);
    out.covariance.noalias() -= q.transpose() * q;
    out.covariance.noalias() += s.transpose() * s;
    out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
    return out;
}

Vector PreferenceModel::posterior_stddev(const LaplaceFit& fit) const {
    Vector variance = prior_.diagonal();
    if (!fit.support.empty()) {
        const Matrix& q = fit.whitened_cross;
        const Matrix s = fit.precision_factor.triangularView<Eigen::Lower>().solve(q);
        variance -= q.colwise().squaredNorm().transpose();
        variance += s.colwise().squaredNorm().transpose();
    }
    return variance.cwiseMax(0.0).cwiseSqrt();
}

// Pathwise update: a prior draw g corrected on the support toward a draw of
// the support posterior, f = g + K_*V K_VV^-1 (f_V - g_V).
Vector PreferenceModel::sample(const LaplaceFit& fit, Rng& rng) const {
    const auto a = static_cast<Eigen::Index>(space_.size());
    Vector draw = prior_factor_.triangularView<Eigen::Lower>() * standard_normal_vector(rng, a);
    const auto m = static_cast<Eigen::Index>(fit.support.size());
    if (m == 0) return draw;

    Vector prior_on_support(m);
    for (Eigen::Index i = 0; i < m; ++i)
        prior_on_support[i] = draw[static_cast<Eigen::Index>(fit.support[static_cast<std::size_t>(i)])];
    Vector target = fit.precision_factor.transpose().triangularView<Eigen::Upper>().solve(standard_normal_vector(rng, m));
    target += fit.whitened_mean;
    target -= fit.support_factor.triangularView<Eigen::Lower>().solve(prior_on_support);
    draw.noalias() += fit.whitened_cross.transpose() * target;
    return draw;
}

UtilityPosterior laplace_posterior(const PreferenceDataset& data, const ActionSpace& space,
                                   const KernelParams& kernel) {
    const PreferenceModel model(space, kernel);
    return model.posterior(model.fit(data));
}

Vector sample_utility(const UtilityPosterior& posterior, Rng& rng) {
    const auto chol = factorize_with_jitter(posterior.covariance, "posterior covariance");
    const Vector z = standard_normal_vector(rng, posterior.mean.size());
    if (posterior.mean.size() == 0) return posterior.mean;
    return posterior.mean + chol.llt.matrixL() * z;
}

Vector standard_normal_vector(Rng& rng, Eigen::Index size) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(size);
    for (Eigen::Index i = 0; i < size; ++i) z[i] = normal(rng);
    return z;
}

ActionIndex argmax(const Vector& values) {
    if (values.size() == 0) throw ConfigError("argmax of an empty vector");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return static_cast<ActionIndex>(best);
}

}  // namespace cospar
