#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cdac {

// All training arithmetic is 64-bit; files store 32-bit floats.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Index = std::size_t;
using Assignments = std::vector<int>;

// Input or configuration problem. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Numerical failure during training (non-finite values, collapsed
// representations). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::string phase, const std::string& what)
        : std::runtime_error(phase + ": " + what), phase_(std::move(phase)) {}

    const std::string& phase() const noexcept { return phase_; }

private:
    std::string phase_;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

}  // namespace cdac
