#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "ita/matrix.hpp"

namespace ita {

struct NamedTensor {
  std::string name;
  Matrix value;
};

// Ordered collection of named tensors. Iteration order is insertion order,
// which fixes the RNG draw order at initialization and the reduction order
// of gradient accumulation.
class ParameterSet {
 public:
  Matrix& add(const std::string& name, std::size_t rows, std::size_t cols);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }

  std::size_t count() const { return items_.size(); }
  NamedTensor& item(std::size_t i) { return items_[i]; }
  const NamedTensor& item(std::size_t i) const { return items_[i]; }

  // Same names and shapes, all values zero.
  ParameterSet zeros_like() const;

  void add_scaled(const ParameterSet& other, double scale);  // this += scale * other
  void set_zero();
  double squared_norm() const;
  void scale(double s);
  bool all_finite() const;

 private:
  std::vector<NamedTensor> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ita
