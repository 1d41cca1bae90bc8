#pragma once

// Gaussian belief over the search vector: conjugate posterior, the ridge point
// estimate, Thompson samples and the clamped one-step reward.

#include "errors.hpp"
#include "grid.hpp"
#include "rng.hpp"

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace cast {

/// Measurement history D: action ids and observations in arrival order.
struct measurement_set {
    std::vector<action_id> actions;
    std::vector<double> y;

    std::size_t count() const { return actions.size(); }
    bool empty() const { return actions.empty(); }
    void push(action_id a, double obs) {
        actions.push_back(a);
        y.push_back(obs);
    }

    /// True if `this` starts with every measurement of `prefix`.
    bool extends(const measurement_set& prefix) const {
        return prefix.count() <= count() && std::equal(prefix.actions.begin(), prefix.actions.end(), actions.begin()) &&
               std::equal(prefix.y.begin(), prefix.y.end(), y.begin());
    }

    mat design_matrix(const action_space& space) const {
        mat x = mat::Zero(static_cast<Eigen::Index>(count()), space.grid().n());
        for (std::size_t i = 0; i < count(); ++i) x.row(static_cast<Eigen::Index>(i)) = space[actions[i]].weight_vector.transpose();
        return x;
    }
    vec observations() const { return Eigen::Map<const vec>(y.data(), static_cast<Eigen::Index>(y.size())); }
};

struct gaussian_belief {
    vec mu;
    mat sigma;
    vec prior_mu;
    mat prior_sigma;
    double sigma2 = 1.0 / 16.0;

    Eigen::Index n() const { return mu.size(); }
};

inline gaussian_belief make_prior(int n, double sigma2, double prior_var = 1.0, double prior_mean = 0.0) {
    if (!(sigma2 > 0.0)) throw config_error("noise variance must be positive");
    if (!(prior_var > 0.0)) throw config_error("prior variance must be positive");
    gaussian_belief b;
    b.prior_mu = vec::Constant(n, prior_mean);
    b.prior_sigma = mat::Identity(n, n) * prior_var;
    b.mu = b.prior_mu;
    b.sigma = b.prior_sigma;
    b.sigma2 = sigma2;
    return b;
}

namespace detail {

constexpr double min_rcond = 1e-14;

inline Eigen::LLT<mat> checked_llt(const mat& m, const char* what) {
    Eigen::LLT<mat> llt(m);
    if (llt.info() != Eigen::Success) throw numerical_error(std::string(what) + ": matrix is not positive definite", INFINITY);
    const double rc = llt.rcond();
    if (!(rc > min_rcond)) throw numerical_error(std::string(what) + ": matrix is ill-conditioned", rc > 0 ? 1.0 / rc : INFINITY);
    return llt;
}

inline mat inverse_spd(const mat& m, const char* what) {
    auto llt = checked_llt(m, what);
    mat inv = llt.solve(mat::Identity(m.rows(), m.cols()));
    return 0.5 * (inv + inv.transpose());
}

inline void check_dims(const gaussian_belief& b, const action_space& space) {
    if (b.n() != space.grid().n() || b.prior_mu.size() != b.n() || b.prior_sigma.rows() != b.n())
        throw contract_violation("belief dimension does not match the action space grid");
}

} // namespace detail

/// Conjugate update from the prior held in `prior` with all of `data`.
inline gaussian_belief posterior_update(const gaussian_belief& prior, const measurement_set& data, const action_space& space) {
    detail::check_dims(prior, space);
    gaussian_belief post = prior;
    post.mu = prior.prior_mu;
    post.sigma = prior.prior_sigma;
    if (data.empty()) return post;

    const mat prior_prec = detail::inverse_spd(prior.prior_sigma, "prior covariance");
    const mat x = data.design_matrix(space);
    const mat precision = prior_prec + x.transpose() * x / prior.sigma2;
    const auto llt = detail::checked_llt(precision, "posterior precision");
    post.sigma = llt.solve(mat::Identity(prior.n(), prior.n()));
    post.sigma = 0.5 * (post.sigma + post.sigma.transpose());
    post.mu = llt.solve(prior_prec * prior.prior_mu + x.transpose() * data.observations() / prior.sigma2);
    return post;
}

/// Regularized least squares (sigma2 * Sigma0^-1 + X^T X)^-1 X^T y.
inline vec estimate(const measurement_set& data, const gaussian_belief& prior, const action_space& space) {
    detail::check_dims(prior, space);
    if (data.empty()) return vec::Zero(prior.n());
    const mat x = data.design_matrix(space);
    const mat normal = prior.sigma2 * detail::inverse_spd(prior.prior_sigma, "prior covariance") + x.transpose() * x;
    return detail::checked_llt(normal, "normal matrix").solve(x.transpose() * data.observations());
}

/// Draws mu + L z with L L^T = Sigma; the factor is computed once.
class thompson_sampler {
public:
    explicit thompson_sampler(const gaussian_belief& b) : mu_(b.mu) {
        Eigen::LLT<mat> llt(b.sigma);
        if (llt.info() != Eigen::Success) throw numerical_error("posterior covariance factorization failed", INFINITY);
        lower_ = llt.matrixL();
        z_.resize(mu_.size());
    }

    vec operator()(rng_t& rng) {
        sample_into(rng, out_);
        return out_;
    }

    void sample_into(rng_t& rng, vec& out) {
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index i = 0; i < z_.size(); ++i) z_[i] = gauss(rng);
        out = mu_;
        out.noalias() += lower_.triangularView<Eigen::Lower>() * z_;
    }

private:
    vec mu_;
    mat lower_;
    vec z_;
    vec out_;
};

inline vec thompson_sample(const gaussian_belief& b, rng_t& rng) { return thompson_sampler(b)(rng); }

struct discrete_sample {
    vec beta_bin; // entries exactly 0.0 or 1.0
};

inline discrete_sample discretize(const vec& sample, double threshold = 0.5) {
    discrete_sample d{vec(sample.size())};
    for (Eigen::Index i = 0; i < sample.size(); ++i) d.beta_bin[i] = sample[i] > threshold ? 1.0 : 0.0;
    return d;
}

inline double lambda_minus(const vec& beta, const vec& estimate_before, const vec& estimate_after) {
    return std::max(0.0, (beta - estimate_before).squaredNorm() - (beta - estimate_after).squaredNorm());
}

/// max{0, |beta - est(before)|^2 - |beta - est(after)|^2}; `after` must extend `before`.
inline double lambda_minus(const vec& beta, const measurement_set& before, const measurement_set& after,
                           const gaussian_belief& prior, const action_space& space) {
    if (!after.extends(before)) throw contract_violation("lambda_minus: data_after must extend data_before");
    if (after.count() == before.count()) return 0.0;
    return lambda_minus(beta, estimate(before, prior, space), estimate(after, prior, space));
}

/// Rank-one maintained posterior and zero-prior-mean estimate, with a full
/// recompute every `refresh_every` updates.
class belief_tracker {
public:
    belief_tracker(const action_space& space, gaussian_belief prior, int refresh_every = 32)
        : space_(&space), belief_(std::move(prior)), refresh_every_(refresh_every) {
        detail::check_dims(belief_, space);
        belief_.mu = belief_.prior_mu;
        belief_.sigma = belief_.prior_sigma;
        estimate_ = vec::Zero(belief_.n());
    }

    void add(action_id a, double y) {
        data_.push(a, y);
        if (++since_refresh_ >= refresh_every_) {
            refresh();
            return;
        }
        const auto& act = (*space_)[a];
        vec u = vec::Zero(belief_.n());
        for (int c : act.cells) u += belief_.sigma.col(c);
        u *= act.weight;
        const double den = belief_.sigma2 + region_dot(act, u);
        belief_.mu += u * ((y - region_dot(act, belief_.mu)) / den);
        estimate_ += u * ((y - region_dot(act, estimate_)) / den);
        belief_.sigma.noalias() -= u * u.transpose() / den;
        belief_.sigma = 0.5 * (belief_.sigma + belief_.sigma.transpose());
    }

    void refresh() {
        belief_ = posterior_update(belief_, data_, *space_);
        estimate_ = estimate(data_, belief_, *space_);
        since_refresh_ = 0;
    }

    const gaussian_belief& belief() const { return belief_; }
    const vec& current_estimate() const { return estimate_; }
    const measurement_set& data() const { return data_; }

private:
    const action_space* space_;
    gaussian_belief belief_;
    measurement_set data_;
    vec estimate_;
    int refresh_every_;
    int since_refresh_ = 0;
};

inline nlohmann::json to_json(const gaussian_belief& b) {
    std::vector<double> mean(b.mu.data(), b.mu.data() + b.mu.size());
    std::vector<double> diag(static_cast<std::size_t>(b.n()));
    for (Eigen::Index i = 0; i < b.n(); ++i) diag[static_cast<std::size_t>(i)] = b.sigma(i, i);
    return {{"mean", mean}, {"cov_diag", diag}, {"sigma2", b.sigma2}};
}

} // namespace cast
