#pragma once

#include <stdexcept>
#include <string>

namespace yamabe {

// Exponents attached to the critical Sobolev problem in dimension N.
struct DimensionParams {
    int N = 6;
    double p = 2.0;
    double two_star = 3.0;
    double alpha_N = 0.2;
    double r0 = 1.0;

    static DimensionParams make(int N, double r0 = 1.0) {
        if (N < 6)
            throw std::invalid_argument("dimension must be >= 6, got " + std::to_string(N));
        if (!(r0 > 0.0))
            throw std::invalid_argument("cutoff radius r0 must be positive");
        DimensionParams d;
        d.N = N;
        d.p = double(N + 2) / double(N - 2);
        d.two_star = 2.0 * N / double(N - 2);
        d.alpha_N = double(N - 2) / (4.0 * (N - 1));
        d.r0 = r0;
        return d;
    }
};

} // namespace yamabe
