#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace prism {

// Row-major so that one entity's embedding is a contiguous row.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

// Bad user-supplied configuration or arguments (CLI exit code 1).
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Failures at run time: I/O, corrupt files, numerical divergence (CLI exit code 2).
struct runtime_failure : std::runtime_error {
  explicit runtime_failure(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace prism
