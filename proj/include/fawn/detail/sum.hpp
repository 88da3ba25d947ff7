#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace fawn::detail {

// Neumaier-compensated accumulator. Summation order is part of the
// numeric contract: results must be reproducible across runs and
// thread counts, so every loss reduction in this project feeds this
// accumulator in ascending voxel order.
class KahanSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

}  // namespace fawn::detail
