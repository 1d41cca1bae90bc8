#include "cast/belief.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

using namespace cast;

namespace {

measurement_set random_measurements(const action_space& space, int count, rng_t& rng) {
    measurement_set d;
    std::uniform_int_distribution<int> pick(0, static_cast<int>(space.size()) - 1);
    std::normal_distribution<double> y(0.3, 0.8);
    for (int i = 0; i < count; ++i) d.push(pick(rng), y(rng));
    return d;
}

double max_abs(const mat& a) { return a.cwiseAbs().maxCoeff(); }

} // namespace

TEST(Posterior, EmptyDataReturnsPrior) {
    const auto space = build_action_space({4, 4});
    auto prior = make_prior(16, 0.25, 2.0, 0.1);
    const auto post = posterior_update(prior, {}, space);
    EXPECT_EQ(post.mu, prior.prior_mu);
    EXPECT_EQ(post.sigma, prior.prior_sigma);
}

TEST(Posterior, ScalarBayesRule) {
    const auto space = build_action_space({1, 1});
    measurement_set d;
    d.push(0, 1.0);
    const auto post = posterior_update(make_prior(1, 1.0), d, space);
    EXPECT_NEAR(post.mu[0], 0.5, 1e-15);
    EXPECT_NEAR(post.sigma(0, 0), 0.5, 1e-15);
}

TEST(Posterior, MatchesDenseSolveOracle) {
    rng_t rng(17);
    for (int side : {2, 4, 8}) {
        const auto space = build_action_space({side, side});
        const int n = side * side;
        for (int rep = 0; rep < 10; ++rep) {
            const auto data = random_measurements(space, 3 + rep, rng);
            auto prior = make_prior(n, 1.0 / 16.0, 0.5 + rep * 0.1, 0.05 * rep);
            const auto post = posterior_update(prior, data, space);
            const mat x = oracle::design(space, data.actions);
            const auto [mean, cov] = oracle::dense_posterior(x, data.observations(), prior.prior_mu, prior.prior_sigma, prior.sigma2);
            EXPECT_LT((post.mu - mean).cwiseAbs().maxCoeff(), 1e-8);
            EXPECT_LT(max_abs(post.sigma - cov), 1e-8);
        }
    }
}

TEST(Posterior, OrderInvariant) {
    rng_t rng(2);
    const auto space = build_action_space({4, 4});
    const auto prior = make_prior(16, 0.1);
    auto data = random_measurements(space, 12, rng);
    const auto a = posterior_update(prior, data, space);
    std::vector<std::size_t> perm(data.count());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    measurement_set shuffled;
    for (auto i : perm) shuffled.push(data.actions[i], data.y[i]);
    const auto b = posterior_update(prior, shuffled, space);
    EXPECT_LT((a.mu - b.mu).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT(max_abs(a.sigma - b.sigma), 1e-8);
}

TEST(Posterior, IncrementalEqualsBatch) {
    rng_t rng(4);
    const auto space = build_action_space({8, 8});
    const auto prior = make_prior(64, 1.0 / 16.0);
    const auto data = random_measurements(space, 80, rng);
    for (int refresh : {1000, 32, 7}) {
        belief_tracker tracker(space, prior, refresh);
        for (std::size_t i = 0; i < data.count(); ++i) tracker.add(data.actions[i], data.y[i]);
        const auto batch = posterior_update(prior, data, space);
        EXPECT_LT((tracker.belief().mu - batch.mu).cwiseAbs().maxCoeff(), 1e-8) << refresh;
        EXPECT_LT(max_abs(tracker.belief().sigma - batch.sigma), 1e-8) << refresh;
        EXPECT_LT((tracker.current_estimate() - estimate(data, prior, space)).cwiseAbs().maxCoeff(), 1e-8) << refresh;
    }
}

TEST(Posterior, TraceNonIncreasingAndSpd) {
    rng_t rng(6);
    const auto space = build_action_space({4, 4});
    const auto prior = make_prior(16, 1.0 / 16.0);
    const auto data = random_measurements(space, 25, rng);
    double last = prior.prior_sigma.trace();
    measurement_set prefix;
    for (std::size_t i = 0; i < data.count(); ++i) {
        prefix.push(data.actions[i], data.y[i]);
        const auto post = posterior_update(prior, prefix, space);
        EXPECT_LE(post.sigma.trace(), last + 1e-12);
        last = post.sigma.trace();
        Eigen::SelfAdjointEigenSolver<mat> eig(post.sigma);
        EXPECT_GT(eig.eigenvalues().minCoeff(), 1e-10);
        EXPECT_LT(max_abs(post.sigma - post.sigma.transpose()), 1e-14);
    }
}

TEST(Posterior, RejectsMismatchedBelief) {
    const auto space = build_action_space({4, 4});
    EXPECT_THROW(posterior_update(make_prior(9, 0.1), {}, space), contract_violation);
    EXPECT_THROW(make_prior(4, 0.0), config_error);
}

TEST(Posterior, SingularPriorIsANumericalError) {
    const auto space = build_action_space({2, 2});
    auto prior = make_prior(4, 0.1);
    prior.prior_sigma(3, 3) = 0.0;
    measurement_set d;
    d.push(0, 1.0);
    try {
        posterior_update(prior, d, space);
        FAIL() << "expected numerical_error";
    } catch (const numerical_error& e) {
        EXPECT_GT(e.condition, 1e13);
    }
}

TEST(Estimate, EmptyDataIsZero) {
    const auto space = build_action_space({4, 4});
    EXPECT_EQ(estimate({}, make_prior(16, 0.1), space), vec::Zero(16));
}

TEST(Estimate, RepeatedPointSenseConverges) {
    const auto space = build_action_space({4, 4});
    const auto truth = make_truth({4, 4}, {6});
    rng_t rng(8);
    measurement_set d;
    const auto a = space.point_action(6);
    for (int i = 0; i < 100; ++i) d.push(a, observe(space[a], truth, {1e-6}, rng));
    const auto prior = make_prior(16, 1e-6);
    EXPECT_NEAR(estimate(d, prior, space)[6], 1.0, 0.05);
}

TEST(Estimate, EqualsPosteriorMeanWithZeroPriorMean) {
    rng_t rng(10);
    const auto space = build_action_space({8, 8});
    for (int rep = 0; rep < 20; ++rep) {
        const auto prior = make_prior(64, 1.0 / 16.0, 0.2 + 0.1 * rep);
        const auto data = random_measurements(space, 1 + rep, rng);
        const vec est = estimate(data, prior, space);
        EXPECT_LT((est - posterior_update(prior, data, space).mu).cwiseAbs().maxCoeff(), 1e-8);
        const mat x = oracle::design(space, data.actions);
        EXPECT_LT((est - oracle::ridge(x, data.observations(), prior.prior_sigma, prior.sigma2)).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Thompson, DegenerateCovarianceReturnsMean) {
    gaussian_belief b = make_prior(3, 0.1);
    b.mu = vec::LinSpaced(3, -1.0, 1.0);
    b.sigma = mat::Identity(3, 3) * 1e-20;
    rng_t rng(1);
    EXPECT_LT((thompson_sample(b, rng) - b.mu).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Thompson, MonteCarloMoments) {
    gaussian_belief b = make_prior(2, 0.1);
    rng_t rng(12);
    const int n = 100000;
    {
        thompson_sampler s(b);
        vec sum = vec::Zero(2);
        for (int i = 0; i < n; ++i) sum += s(rng);
        EXPECT_LT((sum / n).cwiseAbs().maxCoeff(), 0.02);
    }
    b.mu << 0.3, -0.2;
    b.sigma << 1.0, 0.6, 0.6, 2.0;
    thompson_sampler s(b);
    vec sum = vec::Zero(2);
    mat outer = mat::Zero(2, 2);
    for (int i = 0; i < n; ++i) {
        const vec x = s(rng);
        sum += x;
        outer += x * x.transpose();
    }
    const vec mean = sum / n;
    const mat cov = outer / n - mean * mean.transpose();
    EXPECT_LT((mean - b.mu).cwiseAbs().maxCoeff(), 0.02);
    EXPECT_LT(max_abs(cov - b.sigma), 0.05);
}

TEST(Discretize, Examples) {
    EXPECT_EQ(discretize(vec::Zero(4)).beta_bin, vec::Zero(4));
    vec s(3);
    s << 0.9, 0.4, 0.51;
    vec expected(3);
    expected << 1, 0, 1;
    EXPECT_EQ(discretize(s, 0.5).beta_bin, expected);
    const auto truth = make_truth({4, 4}, {1, 9, 14});
    EXPECT_EQ(discretize(truth.beta).beta_bin, truth.beta);
}

TEST(LambdaMinus, IdenticalDataIsZero) {
    const auto space = build_action_space({2, 2});
    const auto prior = make_prior(4, 0.1);
    measurement_set d;
    d.push(1, 0.7);
    vec beta = vec::Ones(4);
    EXPECT_EQ(lambda_minus(beta, d, d, prior, space), 0.0);
}

TEST(LambdaMinus, HandComputedOneDimensionalCase) {
    // n = 1, sigma2 = 1, prior var 1: one observation y moves the estimate from 0 to y/2.
    // With beta = 0.5 and y = 1 the estimate lands on beta from distance 0.5: reward 0.25.
    const auto space = build_action_space({1, 1});
    const auto prior = make_prior(1, 1.0);
    measurement_set before, after;
    after.push(0, 1.0);
    vec beta(1);
    beta << 0.5;
    EXPECT_NEAR(lambda_minus(beta, before, after, prior, space), 0.25, 1e-12);
}

TEST(LambdaMinus, MovingAwayClampsToZero) {
    const auto space = build_action_space({1, 1});
    const auto prior = make_prior(1, 1.0);
    measurement_set before, after;
    after.push(0, -1.0);
    vec beta(1);
    beta << 1.0;
    EXPECT_EQ(lambda_minus(beta, before, after, prior, space), 0.0);
}

TEST(LambdaMinus, RequiresExtension) {
    const auto space = build_action_space({2, 2});
    const auto prior = make_prior(4, 0.1);
    measurement_set a, b;
    a.push(0, 1.0);
    b.push(1, 1.0);
    EXPECT_THROW(lambda_minus(vec::Zero(4), a, b, prior, space), contract_violation);
}

TEST(LambdaMinus, NonNegativeOnRandomTriples) {
    rng_t rng(21);
    const auto space = build_action_space({4, 4});
    const auto prior = make_prior(16, 1.0 / 16.0);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int i = 0; i < 2000; ++i) {
        const auto before = random_measurements(space, i % 6, rng);
        auto after = before;
        const auto extra = random_measurements(space, 1 + i % 3, rng);
        for (std::size_t t = 0; t < extra.count(); ++t) after.push(extra.actions[t], extra.y[t]);
        vec beta(16);
        for (int c = 0; c < 16; ++c) beta[c] = z(rng);
        EXPECT_GE(lambda_minus(beta, before, after, prior, space), 0.0);
    }
}

TEST(BeliefJson, CarriesMeanAndVariances) {
    const auto j = to_json(make_prior(3, 0.5, 2.0));
    EXPECT_EQ(j.at("mean").size(), 3u);
    EXPECT_DOUBLE_EQ(j.at("cov_diag")[1].get<double>(), 2.0);
}
