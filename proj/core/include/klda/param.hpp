#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "klda/error.hpp"

namespace klda {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Flat list of named 64-bit tensors with fixed shapes; the trainable state
// of every model in this project. Weight matrices are [out x in], biases
// are [1 x out] rows.
struct ParamVector {
  struct Entry {
    std::string name;
    Matrix value;
  };

  std::vector<Entry> entries;

  std::size_t size() const { return entries.size(); }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& e : entries) n += static_cast<std::size_t>(e.value.size());
    return n;
  }

  Entry& operator[](std::size_t i) { return entries[i]; }
  const Entry& operator[](std::size_t i) const { return entries[i]; }

  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;

  bool same_shape(const ParamVector& other) const;
  bool all_finite() const;

  static ParamVector zeros_like(const ParamVector& p);
};

}  // namespace klda
