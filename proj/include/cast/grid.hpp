#pragma once

#include "errors.hpp"
#include "rng.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace cast {

using vec = Eigen::VectorXd;
using mat = Eigen::MatrixXd;
using action_id = int;

/// Continuous position in meters; x runs along columns, y along rows.
struct position {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const position&, const position&) = default;
};

struct grid_spec {
    int rows = 16;
    int cols = 16;
    double cell_width = 10.0;
    double speed = 5.0;

    int n() const { return rows * cols; }
    int flat(int row, int col) const { return row * cols + col; }

    position cell_center(int cell) const {
        return {(cell % cols + 0.5) * cell_width, (cell / cols + 0.5) * cell_width};
    }
    double width_m() const { return cols * cell_width; }
    double height_m() const { return rows * cell_width; }

    void validate() const {
        if (rows < 1 || cols < 1) throw config_error("grid must have at least one row and column");
        if (!(cell_width > 0.0)) throw config_error("cell_width must be positive");
        if (!(speed > 0.0)) throw config_error("speed must be positive");
    }
};

/// Sparse binary search vector.
struct ground_truth {
    vec beta;
    std::vector<int> target_indices; // sorted

    int k() const { return static_cast<int>(target_indices.size()); }
};

inline ground_truth make_truth(const grid_spec& grid, std::vector<int> targets) {
    std::sort(targets.begin(), targets.end());
    if (std::adjacent_find(targets.begin(), targets.end()) != targets.end())
        throw contract_violation("duplicate target index");
    ground_truth t{vec::Zero(grid.n()), std::move(targets)};
    for (int i : t.target_indices) {
        if (i < 0 || i >= grid.n()) throw contract_violation("target index out of range");
        t.beta[i] = 1.0;
    }
    return t;
}

/// Uniformly random k-sparse truth (partial Fisher-Yates).
inline ground_truth random_truth(const grid_spec& grid, int k, rng_t& rng) {
    if (k < 0 || k > grid.n()) throw config_error("k must lie in [0, n]");
    std::vector<int> cells(grid.n());
    std::iota(cells.begin(), cells.end(), 0);
    for (int i = 0; i < k; ++i) {
        std::uniform_int_distribution<int> pick(i, grid.n() - 1);
        std::swap(cells[i], cells[pick(rng)]);
    }
    cells.resize(k);
    return make_truth(grid, std::move(cells));
}

struct region {
    int row_offset = 0;
    int col_offset = 0;
    int side = 1;

    bool contains(int row, int col) const {
        return row >= row_offset && row < row_offset + side && col >= col_offset && col < col_offset + side;
    }
};

enum class anchor_mode { center, corner };

/// Constant-power square region sense.
struct sensing_action {
    action_id id = 0;
    region area;
    double weight = 1.0;  // 1/side on every covered cell
    vec weight_vector;    // dense copy, length n
    std::vector<int> cells;
    position anchor;
};

class action_space {
public:
    action_space() = default;

    action_space(const grid_spec& grid, anchor_mode mode = anchor_mode::center) : grid_(grid) {
        grid.validate();
        if (grid.rows != grid.cols || (grid.rows & (grid.rows - 1)) != 0)
            throw config_error("action space requires a square grid with power-of-two side, got " +
                               std::to_string(grid.rows) + "x" + std::to_string(grid.cols));
        point_ids_.assign(grid.n(), -1);
        for (int side = grid.rows; side >= 1; side /= 2) {
            for (int r = 0; r < grid.rows; r += side) {
                for (int c = 0; c < grid.cols; c += side) {
                    sensing_action a;
                    a.id = static_cast<action_id>(actions_.size());
                    a.area = {r, c, side};
                    a.weight = 1.0 / side;
                    a.weight_vector = vec::Zero(grid.n());
                    for (int rr = r; rr < r + side; ++rr)
                        for (int cc = c; cc < c + side; ++cc) {
                            a.cells.push_back(grid.flat(rr, cc));
                            a.weight_vector[grid.flat(rr, cc)] = a.weight;
                        }
                    if (mode == anchor_mode::center)
                        a.anchor = {(c + side / 2.0) * grid.cell_width, (r + side / 2.0) * grid.cell_width};
                    else
                        a.anchor = {c * grid.cell_width, r * grid.cell_width};
                    if (side == 1) point_ids_[grid.flat(r, c)] = a.id;
                    actions_.push_back(std::move(a));
                }
            }
        }
    }

    const grid_spec& grid() const { return grid_; }
    std::size_t size() const { return actions_.size(); }
    const sensing_action& operator[](action_id id) const { return actions_.at(static_cast<std::size_t>(id)); }
    std::span<const sensing_action> actions() const { return actions_; }
    action_id point_action(int cell) const { return point_ids_.at(static_cast<std::size_t>(cell)); }

private:
    grid_spec grid_;
    std::vector<sensing_action> actions_;
    std::vector<action_id> point_ids_;
};

inline action_space build_action_space(const grid_spec& grid, anchor_mode mode = anchor_mode::center) {
    return action_space(grid, mode);
}

/// x^T v, summed over the region only.
template <typename Vector>
double region_dot(const sensing_action& a, const Vector& v) {
    double s = 0.0;
    for (int c : a.cells) s += v[c];
    return s * a.weight;
}

struct noise_model {
    double sigma2 = 1.0 / 16.0;
    void validate() const {
        if (!(sigma2 > 0.0)) throw config_error("noise variance must be positive");
    }
};

struct cost_model {
    double sensing_cost = 0.0;
    double speed = 5.0;
    void validate() const {
        if (sensing_cost < 0.0) throw config_error("sensing cost must be non-negative");
        if (!(speed > 0.0)) throw config_error("speed must be positive");
    }
};

struct measurement {
    action_id action = 0;
    double observation = 0.0;
    int agent = 0;
    double wall_time = 0.0;
};

/// y = x^T beta + e, e ~ N(0, sigma2).
inline double observe(const sensing_action& a, const ground_truth& truth, const noise_model& noise, rng_t& rng) {
    std::normal_distribution<double> eps(0.0, std::sqrt(noise.sigma2));
    return region_dot(a, truth.beta) + eps(rng);
}

inline double distance(const position& a, const position& b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double travel_cost(const position& from, const position& to, const cost_model& model) {
    return distance(from, to) / model.speed;
}

inline double action_cost(const position& agent, const sensing_action& a, const cost_model& model) {
    return travel_cost(agent, a.anchor, model) + model.sensing_cost;
}

inline nlohmann::json to_json(const ground_truth& t) {
    return {{"n", t.beta.size()}, {"k", t.k()}, {"targets", t.target_indices}};
}

inline nlohmann::json to_json(const action_space& space) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& a : space.actions())
        out.push_back({{"id", a.id},
                       {"row", a.area.row_offset},
                       {"col", a.area.col_offset},
                       {"side", a.area.side},
                       {"anchor", {a.anchor.x, a.anchor.y}},
                       {"cells", a.cells}});
    return out;
}

} // namespace cast
