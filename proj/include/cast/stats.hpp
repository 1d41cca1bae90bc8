#pragma once

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace cast {

/// Welford accumulator.
struct running_stats {
    long count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double x) {
        ++count;
        const double delta = x - mean;
        mean += delta / static_cast<double>(count);
        m2 += delta * (x - mean);
    }
    double population_variance() const { return count > 0 ? std::max(0.0, m2 / static_cast<double>(count)) : 0.0; }
    double sample_variance() const { return count > 1 ? std::max(0.0, m2 / static_cast<double>(count - 1)) : 0.0; }
};

/// One-sided Student-t quantiles t_{confidence, df}, memoized by df.
class t_quantiles {
public:
    explicit t_quantiles(double confidence = 0.95) : confidence_(confidence) {}

    double operator()(long df) {
        if (df < 1) return 0.0;
        const auto i = static_cast<std::size_t>(df);
        if (i >= table_.size()) {
            const std::size_t old = table_.size();
            table_.resize(std::max<std::size_t>(i + 1, 2 * old + 16), 0.0);
            for (std::size_t d = std::max<std::size_t>(old, 1); d < table_.size(); ++d)
                table_[d] = boost::math::quantile(boost::math::students_t(static_cast<double>(d)), confidence_);
        }
        return table_[i];
    }

    double confidence() const { return confidence_; }

private:
    double confidence_;
    std::vector<double> table_;
};

/// mean - t * s / sqrt(count), floored at zero; the raw sample when count == 1.
inline double lower_confidence_bound(const running_stats& s, t_quantiles& t) {
    if (s.count == 0) return 0.0;
    if (s.count == 1) return std::max(0.0, s.mean);
    const double half_width = t(s.count - 1) * std::sqrt(s.sample_variance() / static_cast<double>(s.count));
    return std::max(0.0, s.mean - half_width);
}

} // namespace cast
