// losscheck.hpp - self-verification of the loss kernels: worked examples,
// finite-difference gradient checks on seeded random grids and linearity of
// the composite loss in lambda.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cardioaug {

struct LossCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct LossCheckReport {
    std::vector<LossCheck> checks;
    double max_relative_gradient_error = 0.0;
    std::size_t gradient_points = 0;
    double seconds = 0.0;

    bool passed() const noexcept;
    std::string to_json() const;
};

struct LossCheckOptions {
    std::uint64_t seed = 0;
    int random_grids = 50;
    double fd_step = 1e-4;
    double gradient_tolerance = 1e-4;
};

LossCheckReport run_losscheck(const LossCheckOptions &opts = {});

} // namespace cardioaug
