#pragma once

#include "cospar/action_space.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

namespace cospar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Rng = std::mt19937_64;

/// Squared-exponential prior over utilities plus the probit noise scale.
struct KernelParams {
    std::vector<double> lengthscales;  ///< per dimension, in the dimension's units
    double signal_variance = 1.0;
    double noise_variance = 0.0;  ///< added to the prior diagonal
    double preference_noise = 1.0;  ///< sigma of the internal-valuation noise

    /// Throws ConfigError unless every entry is positive (noise_variance may be
    /// zero) and there is one lengthscale per dimension.
    void validate(std::size_t dimensionality) const;

    bool operator==(const KernelParams&) const = default;
};

enum class FeedbackSource { pairwise, coactive };

struct PreferenceRecord {
    ActionIndex winner = 0;
    ActionIndex loser = 0;
    double weight = 1.0;
    FeedbackSource source = FeedbackSource::pairwise;

    bool operator==(const PreferenceRecord&) const = default;
};

using PreferenceDataset = std::vector<PreferenceRecord>;

void validate_dataset(const PreferenceDataset& data, std::size_t action_count);

/// Gaussian approximation N(mean, covariance) over the utility vector.
struct UtilityPosterior {
    Vector mean;
    Matrix covariance;
};

Matrix prior_covariance(const ActionSpace& space, const KernelParams& kernel);

/// Probit noise scale of a record with the given weight: sigma / sqrt(weight).
double record_noise(double preference_noise, double weight);

/// Phi((f_winner - f_loser) / (sqrt(2) sigma_k)).
double pair_likelihood(double f_winner, double f_loser, double sigma_k);

/// S(f) = 1/2 f' prior^-1 f - sum_k ln Phi(z_k), f-independent constants dropped.
double negative_log_posterior(const Vector& f, const PreferenceDataset& data,
                              const Matrix& prior_cov, const KernelParams& kernel);
Vector nlp_gradient(const Vector& f, const PreferenceDataset& data, const Matrix& prior_cov,
                    const KernelParams& kernel);
Matrix nlp_hessian(const Vector& f, const PreferenceDataset& data, const Matrix& prior_cov,
                   const KernelParams& kernel);
/// Curvature of the likelihood term alone (the PSD part of the Hessian).
Matrix likelihood_curvature(const Vector& f, const PreferenceDataset& data,
                            const KernelParams& kernel);

/// Cholesky factor of a symmetric matrix, retrying with diagonal jitter
/// 1e-10 * mean(diag), escalating x10 up to 1e-4 * mean(diag).
struct JitteredCholesky {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;

    Matrix lower() const { return llt.matrixL(); }
};

JitteredCholesky factorize_with_jitter(const Matrix& m, std::string_view what);

/// Laplace fit expressed on the support of the data (the actions that appear
/// in any record). Off-support utilities follow the prior conditional on the
/// support values, so this is the full posterior in compact form.
struct LaplaceFit {
    std::vector<ActionIndex> support;  ///< ascending
    Vector support_mean;  ///< MAP utilities on the support, L u
    Vector whitened_mean;  ///< u
    Matrix support_factor;  ///< L, lower Cholesky factor of K_ss (jittered)
    Matrix precision_factor;  ///< lower Cholesky factor of I + L' Lambda L
    Matrix support_covariance;  ///< (K_ss^-1 + Lambda)^-1
    Matrix whitened_cross;  ///< L^-1 K_s*, support x A
    Vector mean;  ///< MAP utilities over every action
    int newton_iterations = 0;
    double gradient_norm = 0.0;
};

/// A fixed action space and kernel with the prior factorized once. Immutable
/// after construction and safe to share across threads.
class PreferenceModel {
public:
    PreferenceModel(ActionSpace space, KernelParams kernel);

    const ActionSpace& space() const noexcept { return space_; }
    const KernelParams& kernel() const noexcept { return kernel_; }
    const Matrix& prior_covariance() const noexcept { return prior_; }
    const Matrix& prior_factor() const noexcept { return prior_factor_; }

    /// Damped Newton from f = 0 on the negative log posterior.
    LaplaceFit fit(const PreferenceDataset& data) const;

    UtilityPosterior posterior(const LaplaceFit& fit) const;
    Vector posterior_stddev(const LaplaceFit& fit) const;

    /// One utility draw from the fitted posterior. Draws a prior sample over
    /// all actions, then shifts it so its support values follow the Laplace
    /// posterior there. Consumes A then |support| standard normals.
    Vector sample(const LaplaceFit& fit, Rng& rng) const;

private:
    ActionSpace space_;
    KernelParams kernel_;
    Matrix prior_;
    Matrix prior_factor_;
};

UtilityPosterior laplace_posterior(const PreferenceDataset& data, const ActionSpace& space,
                                   const KernelParams& kernel);

/// mean + L z, with L the (jittered) Cholesky factor of the covariance.
Vector sample_utility(const UtilityPosterior& posterior, Rng& rng);

Vector standard_normal_vector(Rng& rng, Eigen::Index size);

/// Lowest index among the maxima.
ActionIndex argmax(const Vector& values);

}  // namespace cospar
