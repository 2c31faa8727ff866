#pragma once

#include <stdexcept>
#include <string>

namespace yamabe {

struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DivergentIntegralError : std::domain_error {
    using std::domain_error::domain_error;
};

struct RankDeficiencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NoCompetingPointsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace yamabe
