#pragma once

// Independent reference implementations used only by the tests. Each one is the
// obvious slow algorithm, written without touching the code it checks.

#include "cast/grid.hpp"
#include "cast/pareto.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <set>
#include <tuple>
#include <vector>

namespace oracle {

using cast::mat;
using cast::vec;

struct square {
    int row, col, side;
    friend auto operator<=>(const square&, const square&) = default;
};

/// Every aligned power-of-two square inside a side x side grid, by nested loops.
inline std::set<square> aligned_squares(int side) {
    std::set<square> out;
    for (int s = 1; s <= side; s *= 2)
        for (int r = 0; r + s <= side; ++r)
            for (int c = 0; c + s <= side; ++c)
                if (r % s == 0 && c % s == 0) out.insert({r, c, s});
    return out;
}

/// Dense design matrix: row t has 1/side on each covered cell.
inline mat design(const cast::action_space& space, const std::vector<int>& actions) {
    const int n = space.grid().n();
    mat x = mat::Zero(static_cast<Eigen::Index>(actions.size()), n);
    for (std::size_t t = 0; t < actions.size(); ++t) {
        const auto& a = space[actions[t]];
        for (int r = 0; r < a.area.side; ++r)
            for (int c = 0; c < a.area.side; ++c)
                x(static_cast<Eigen::Index>(t), space.grid().flat(a.area.row_offset + r, a.area.col_offset + c)) = 1.0 / a.area.side;
    }
    return x;
}

/// Posterior mean and covariance by LU solves on the normal equations.
inline std::pair<vec, mat> dense_posterior(const mat& x, const vec& y, const vec& mu0, const mat& sigma0, double sigma2) {
    const mat prec0 = sigma0.fullPivLu().inverse();
    const mat prec = prec0 + x.transpose() * x / sigma2;
    const mat cov = prec.fullPivLu().inverse();
    const vec mean = prec.fullPivLu().solve(prec0 * mu0 + x.transpose() * y / sigma2);
    return {mean, cov};
}

/// (sigma2 Sigma0^-1 + X^T X)^-1 X^T y.
inline vec ridge(const mat& x, const vec& y, const mat& sigma0, double sigma2) {
    const mat a = sigma2 * sigma0.fullPivLu().inverse() + x.transpose() * x;
    return a.fullPivLu().solve(x.transpose() * y);
}

inline bool pairwise_dominates(const cast::rc_vector& g, const cast::rc_vector& h) {
    const bool ge = g.r_lcb >= h.r_lcb && g.neg_cost >= h.neg_cost;
    const bool gt = g.r_lcb > h.r_lcb || g.neg_cost > h.neg_cost;
    return ge && gt;
}

/// O(N^2) dominance filter, duplicates collapsed, sorted by (neg_cost desc).
inline std::vector<cast::rc_vector> brute_filter(const std::vector<cast::rc_vector>& in) {
    std::vector<cast::rc_vector> out;
    for (std::size_t i = 0; i < in.size(); ++i) {
        bool dominated = false;
        for (std::size_t j = 0; j < in.size() && !dominated; ++j) dominated = pairwise_dominates(in[j], in[i]);
        if (dominated) continue;
        if (std::find(out.begin(), out.end(), in[i]) == out.end()) out.push_back(in[i]);
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.neg_cost > b.neg_cost; });
    return out;
}

/// Full cross product of child fronts with normalized weights, then filtered.
inline std::vector<cast::rc_vector> brute_combine(const std::vector<std::vector<cast::rc_vector>>& fronts, const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    std::vector<cast::rc_vector> all{{0.0, 0.0}};
    for (std::size_t c = 0; c < fronts.size(); ++c) {
        std::vector<cast::rc_vector> next;
        for (const auto& a : all)
            for (const auto& v : fronts[c]) next.push_back({a.r_lcb + w[c] / total * v.r_lcb, a.neg_cost + w[c] / total * v.neg_cost});
        all = next;
    }
    return brute_filter(all);
}

inline bool same_vectors(std::span<const cast::rc_vector> a, const std::vector<cast::rc_vector>& b, double tol = 0.0) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (std::abs(a[i].r_lcb - b[i].r_lcb) > tol || std::abs(a[i].neg_cost - b[i].neg_cost) > tol) return false;
    return true;
}

} // namespace oracle
