#include "cospar/errors.hpp"
#include "cospar/preference_model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/LU>

#include <cmath>

using namespace cospar;

namespace {

ActionSpace line(std::size_t count) { return build_action_grid({{"x", 0.0, 1.0, count, ""}}); }

// Fixed instance with values frozen from an independent SciPy fit.
struct Frozen {
    ActionSpace space = line(3);
    KernelParams kernel{{0.5}, 1.0, 1e-6, 0.1};
    PreferenceDataset data{{0, 1, 1.0, FeedbackSource::pairwise},
                           {2, 1, 0.5, FeedbackSource::coactive},
                           {0, 2, 1.0, FeedbackSource::pairwise}};
};

}  // namespace

TEST_CASE("prior covariance entries") {
    const auto space = build_action_grid({{"s", 0.08, 0.18, 15, "m"}});
    const KernelParams cg{{0.025}, 1e-4, 1e-8, 0.01};
    const auto k = prior_covariance(space, cg);
    CHECK(k(3, 3) == doctest::Approx(1e-4 + 1e-8).epsilon(1e-14));

    const auto pair = build_action_grid({{"x", 0.0, 0.025, 2, ""}});
    CHECK(prior_covariance(pair, cg)(0, 1) == doctest::Approx(1e-4 * std::exp(-0.5)).epsilon(1e-14));
    CHECK(prior_covariance(pair, cg)(0, 1) == doctest::Approx(6.0653e-5).epsilon(1e-4));

    const auto flat = prior_covariance(line(4), {{1e12}, 1.0, 0.0, 1.0});
    CHECK(flat.minCoeff() == doctest::Approx(1.0));
    CHECK_THROWS_AS(prior_covariance(line(4), {{1.0, 1.0}, 1.0, 0.0, 1.0}), ConfigError);
}

TEST_CASE("pair likelihood") {
    CHECK(pair_likelihood(0.3, 0.3, 0.1) == 0.5);
    CHECK(pair_likelihood(std::sqrt(2.0) * 0.1, 0.0, 0.1) == doctest::Approx(0.841345).epsilon(1e-6));
    CHECK(pair_likelihood(1.0, 0.0, 0.1) > 0.999999);
    CHECK_THROWS_AS(pair_likelihood(1.0, 0.0, 0.0), ConfigError);
    CHECK_THROWS_AS(pair_likelihood(1.0, 0.0, -1.0), ConfigError);
}

TEST_CASE("negative log posterior closed forms and formula oracle") {
    const Frozen fx;
    const auto k = prior_covariance(fx.space, fx.kernel);
    CHECK(negative_log_posterior(Vector::Zero(3), {}, k, fx.kernel) == 0.0);
    CHECK(negative_log_posterior(Vector::Zero(3), fx.data, k, fx.kernel) == doctest::Approx(3.0 * std::log(2.0)));
    const Vector f = (Vector(3) << 0.1, -0.2, 0.05).finished();
    CHECK(negative_log_posterior(f, fx.data, k, fx.kernel) == doctest::Approx(0.6950763833897137).epsilon(1e-8));
}

TEST_CASE("gradient closed forms") {
    const auto space = line(4);
    const KernelParams kernel{{0.5}, 1.0, 1e-3, 0.2};
    const auto k = prior_covariance(space, kernel);
    const Vector f = (Vector(4) << 0.3, -0.1, 0.2, 0.0).finished();
    const Vector prior_only = nlp_gradient(f, {}, k, kernel);
    CHECK(oracle::relative_error(prior_only, k.fullPivLu().solve(f)) < 1e-9);

    const PreferenceDataset one{{1, 3, 1.0, FeedbackSource::pairwise}};
    const Vector g = nlp_gradient(Vector::Zero(4), one, k, kernel);
    const double expected = 0.7978845608028654 / (std::sqrt(2.0) * 0.2);
    CHECK(g[1] == doctest::Approx(-expected).epsilon(1e-12));
    CHECK(g[3] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(g[0] == 0.0);
}

TEST_CASE("gradient and Hessian agree with finite differences") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto inst = oracle::random_instance(rng, 8, 12);
        const auto k = prior_covariance(inst.space, inst.kernel);
        Vector f = Vector::Random(static_cast<Eigen::Index>(inst.space.size())) * 0.5;
        auto s = [&](const Vector& x) { return negative_log_posterior(x, inst.data, k, inst.kernel); };
        const Vector g = nlp_gradient(f, inst.data, k, inst.kernel);
        CHECK(oracle::relative_error(g, oracle::finite_gradient(s, f, 1e-5)) <= 1e-5);

        const Matrix h = nlp_hessian(f, inst.data, k, inst.kernel);
        Matrix fd(h.rows(), h.cols());
        for (Eigen::Index i = 0; i < h.cols(); ++i) {
            auto gi = [&](const Vector& x) { return nlp_gradient(x, inst.data, k, inst.kernel)[i]; };
            fd.row(i) = oracle::finite_gradient(gi, f, 1e-5).transpose();
        }
        CHECK(oracle::relative_error(h, fd) <= 1e-4);
    }
}

TEST_CASE("Hessian structure") {
    const auto space = line(4);
    const KernelParams kernel{{0.5}, 1.0, 1e-3, 0.2};
    const auto k = prior_covariance(space, kernel);
    const Vector f = Vector::Zero(4);
    CHECK(oracle::relative_error(nlp_hessian(f, {}, k, kernel), k.inverse()) < 1e-9);
    const PreferenceDataset one{{0, 2, 1.0, FeedbackSource::pairwise}};
    const Matrix lambda = likelihood_curvature(f, one, kernel);
    Eigen::FullPivLU<Matrix> lu(lambda);
    CHECK(lu.rank() <= 1);
    CHECK(lambda.row(0).sum() == doctest::Approx(0.0));
    CHECK(lambda.row(2).sum() == doctest::Approx(0.0));
    CHECK(lambda(1, 1) == 0.0);
    CHECK(lambda(0, 0) > 0.0);
}

TEST_CASE("Laplace posterior matches frozen SciPy values") {
    const Frozen fx;
    const auto post = laplace_posterior(fx.data, fx.space, fx.kernel);
    const Vector mean = (Vector(3) << 0.0818764127273305, -0.4108256750985947, -0.16302977346143732).finished();
    Matrix cov(3, 3);
    cov << 0.5865513768001374, 0.5564915822109219, 0.5389003263005804, 0.5564915822109218, 0.6964164270356495,
        0.596600485395417, 0.5389003263005803, 0.596600485395417, 0.5944743779321292;
    CHECK((post.mean - mean).lpNorm<Eigen::Infinity>() < 1e-7);
    CHECK((post.covariance - cov).lpNorm<Eigen::Infinity>() < 1e-6);
}

TEST_CASE("empty dataset returns the prior") {
    const auto space = line(5);
    const KernelParams kernel{{0.3}, 2.0, 1e-4, 0.1};
    const auto post = laplace_posterior({}, space, kernel);
    CHECK(post.mean.isZero(0.0));
    CHECK((post.covariance - prior_covariance(space, kernel)).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("swapping winner and loser negates the MAP mean") {
    const auto space = line(2);
    const KernelParams kernel{{0.5}, 1.0, 1e-4, 0.1};
    const auto post = laplace_posterior({{0, 1, 1.0, FeedbackSource::pairwise}}, space, kernel);
    CHECK(post.mean[0] > 0.0);
    CHECK(post.mean[0] == doctest::Approx(-post.mean[1]).epsilon(1e-10));
}

TEST_CASE("MAP mean matches a brute-force minimizer") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 8; ++trial) {
        const auto inst = oracle::random_instance(rng, 4, 6);
        const auto post = laplace_posterior(inst.data, inst.space, inst.kernel);
        const auto k = prior_covariance(inst.space, inst.kernel);
        const Vector ref = oracle::minimize(k, inst.data, inst.kernel.preference_noise);
        CHECK((post.mean - ref).lpNorm<Eigen::Infinity>() <= 1e-4);
    }
}

TEST_CASE("compact fit agrees with the dense gradient at the optimum") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 10; ++trial) {
        auto inst = oracle::random_instance(rng, 10, 15);
        const PreferenceModel model(inst.space, inst.kernel);
        const auto fit = model.fit(inst.data);
        const auto k = prior_covariance(inst.space, inst.kernel);
        const Vector g = nlp_gradient(fit.mean, inst.data, k, inst.kernel);
        CHECK(g.lpNorm<Eigen::Infinity>() < 1e-5);
        // Covariance equals the inverse Hessian of the dense objective.
        const Matrix cov = model.posterior(fit).covariance;
        const Matrix dense = nlp_hessian(fit.mean, inst.data, k, inst.kernel).inverse();
        CHECK(oracle::relative_error(cov, dense) < 1e-6);
        CHECK((model.posterior_stddev(fit).array().square() - cov.diagonal().array()).abs().maxCoeff() < 1e-9);
    }
}

// For one record the MAP gap d solves d / s^2 = c r(c d), with s^2 the prior
// variance of the difference and c = 1 / (sqrt(2) sigma_k). d grows with the
// weight while c s stays below about 1.5; past that the likelihood saturates
// and the prior pulls the gap back in.
TEST_CASE("heavier weights widen the MAP gap while the likelihood is soft") {
    const auto space = line(3);
    const KernelParams kernel{{0.5}, 1.0, 1e-4, 1.0};
    const double s = std::sqrt(2.0 * (1.0 + 1e-4 - std::exp(-2.0)));
    double previous = 0.0;
    for (const double w : {0.05, 0.1, 0.25, 0.5, 1.0, 1.5}) {
        CHECK(std::sqrt(w) / std::sqrt(2.0) * s < 1.5);
        const auto post = laplace_posterior({{2, 0, w, FeedbackSource::coactive}}, space, kernel);
        const double gap = post.mean[2] - post.mean[0];
        CHECK(gap > previous);
        previous = gap;
    }
}

TEST_CASE("very sharp likelihoods shrink the MAP gap again") {
    const auto space = line(3);
    const KernelParams kernel{{0.5}, 1.0, 1e-4, 0.05};
    const auto gap = [&](double w) {
        const auto post = laplace_posterior({{2, 0, w, FeedbackSource::coactive}}, space, kernel);
        return post.mean[2] - post.mean[0];
    };
    CHECK(gap(4.0) < gap(1.0));
    CHECK(gap(1.0) > 0.0);
}

TEST_CASE("dataset validation") {
    const auto space = line(3);
    const KernelParams kernel{{0.5}, 1.0, 1e-4, 0.2};
    CHECK_THROWS_AS(laplace_posterior({{0, 3, 1.0, FeedbackSource::pairwise}}, space, kernel), ConfigError);
    CHECK_THROWS_AS(laplace_posterior({{1, 1, 1.0, FeedbackSource::pairwise}}, space, kernel), ConfigError);
    CHECK_THROWS_AS(laplace_posterior({{0, 1, 0.0, FeedbackSource::pairwise}}, space, kernel), ConfigError);
}

TEST_CASE("jitter escalates and then fails loudly") {
    Matrix singular = Matrix::Ones(3, 3);
    const auto chol = factorize_with_jitter(singular, "test");
    CHECK(chol.jitter > 0.0);
    Matrix indefinite = Matrix::Identity(3, 3);
    indefinite(2, 2) = -1.0;
    CHECK_THROWS_AS(factorize_with_jitter(indefinite, "test"), NumericalError);
    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(factorize_with_jitter(bad, "test"), NumericalError);
}

TEST_CASE("sampling") {
    const Frozen fx;
    const auto post = laplace_posterior(fx.data, fx.space, fx.kernel);
    Rng a(3), b(3);
    CHECK(sample_utility(post, a) == sample_utility(post, b));

    UtilityPosterior point{(Vector(3) << 1.0, 2.0, 3.0).finished(), Matrix::Zero(3, 3)};
    Rng rng(1);
    CHECK((sample_utility(point, rng) - point.mean).lpNorm<Eigen::Infinity>() < 1e-4);

    const PreferenceModel model(fx.space, fx.kernel);
    const auto fit = model.fit(fx.data);
    Rng c(4), d(4);
    CHECK(model.sample(fit, c) == model.sample(fit, d));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    CHECK(argmax((Vector(3) << 0.3, 0.9, 0.9).finished()) == 1);
    CHECK(argmax((Vector(1) << -1.0).finished()) == 0);
    CHECK_THROWS_AS(argmax(Vector()), ConfigError);
}
