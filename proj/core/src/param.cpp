#include "klda/param.hpp"

namespace klda {

Matrix& ParamVector::at(const std::string& name) {
  for (auto& e : entries)
    if (e.name == name) return e.value;
  throw ContractViolation("no parameter entry named '" + name + "'");
}

const Matrix& ParamVector::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e.value;
  throw ContractViolation("no parameter entry named '" + name + "'");
}

bool ParamVector::same_shape(const ParamVector& other) const {
  if (entries.size() != other.entries.size()) return false;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].value.rows() != other.entries[i].value.rows() ||
        entries[i].value.cols() != other.entries[i].value.cols())
      return false;
  }
  return true;
}

bool ParamVector::all_finite() const {
  for (const auto& e : entries)
    if (!e.value.allFinite()) return false;
  return true;
}

ParamVector ParamVector::zeros_like(const ParamVector& p) {
  ParamVector z;
  z.entries.reserve(p.entries.size());
  for (const auto& e : p.entries)
    z.entries.push_back({e.name, Matrix::Zero(e.value.rows(), e.value.cols())});
  return z;
}

}  // namespace klda
