#pragma once

#include <cmath>
#include <span>

namespace fluxlim {

// Neumaier-compensated accumulator; keeps mass and energy sums reproducible
// and accurate to a few ulps regardless of the summation length.
class KahanSum {
public:
    KahanSum& operator+=(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
        return *this;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double ordered_sum(std::span<const double> xs)
{
    KahanSum acc;
    for (double x : xs)
        acc += x;
    return acc.value();
}

} // namespace fluxlim
