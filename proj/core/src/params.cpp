#include "ita/params.hpp"

#include <stdexcept>

namespace ita {

Matrix& ParameterSet::add(const std::string& name, std::size_t rows, std::size_t cols) {
  if (has(name)) throw std::logic_error("duplicate parameter tensor '" + name + "'");
  index_[name] = items_.size();
  items_.push_back(NamedTensor{name, Matrix(rows, cols)});
  return items_.back().value;
}

Matrix& ParameterSet::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter tensor '" + name + "'");
  return items_[it->second].value;
}

const Matrix& ParameterSet::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::logic_error("unknown parameter tensor '" + name + "'");
  return items_[it->second].value;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& item : items_) out.add(item.name, item.value.rows(), item.value.cols());
  return out;
}

void ParameterSet::add_scaled(const ParameterSet& other, double scale) {
  for (std::size_t i = 0; i < items_.size(); ++i)
    items_[i].value.axpy_inplace(scale, other.items_[i].value);
}

void ParameterSet::set_zero() {
  for (auto& item : items_) item.value.fill(0.0);
}

double ParameterSet::squared_norm() const {
  double s = 0.0;
  for (const auto& item : items_)
    for (double v : item.value.values()) s += v * v;
  return s;
}

void ParameterSet::scale(double s) {
  for (auto& item : items_) item.value.scale_inplace(s);
}

bool ParameterSet::all_finite() const {
  for (const auto& item : items_)
    if (!item.value.all_finite()) return false;
  return true;
}

}  // namespace ita
