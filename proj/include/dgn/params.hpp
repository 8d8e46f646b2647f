#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "dgn/error.hpp"
#include "dgn/rng.hpp"
#include "dgn/tape.hpp"
#include "dgn/tensor.hpp"

namespace dgn {

// A named learned tensor plus its gradient buffer of identical shape.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> gradient;

  Parameter(std::string n, Tensor<T> v) : name(std::move(n)), value(std::move(v)) {
    gradient = value;
    gradient.fill(T(0));
  }

  void zero_grad() { gradient.fill(T(0)); }

  // Record this parameter on a tape; backward() accumulates into `gradient`.
  typename Tape<T>::Id use(Tape<T>& tape) { return tape.leaf(value, &gradient); }
};

// Ordered collection of uniquely named parameters. Insertion order is the
// canonical order for initialization, serialization and optimizer state.
template <typename T>
class ParamStore {
 public:
  Parameter<T>& add(const std::string& name, Tensor<T> value) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = items_.size();
    items_.push_back(std::make_unique<Parameter<T>>(name, std::move(value)));
    return *items_.back();
  }

  Parameter<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("unknown parameter: " + name);
    return *items_[it->second];
  }

  const Parameter<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw LookupError("unknown parameter: " + name);
    return *items_[it->second];
  }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::size_t size() const { return items_.size(); }
  Parameter<T>& at(std::size_t i) { return *items_[i]; }
  const Parameter<T>& at(std::size_t i) const { return *items_[i]; }

  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& p : items_) n += p->value.size();
    return n;
  }

  void zero_grads() {
    for (auto& p : items_) p->zero_grad();
  }

  T grad_norm() const {
    double acc = 0;
    for (const auto& p : items_)
      for (std::size_t i = 0; i < p->gradient.size(); ++i) {
        double g = static_cast<double>(p->gradient[i]);
        acc += g * g;
      }
    return static_cast<T>(std::sqrt(acc));
  }

  void scale_grads(T factor) {
    for (auto& p : items_)
      for (std::size_t i = 0; i < p->gradient.size(); ++i) p->gradient[i] *= factor;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    for (const auto& p : items_) out.add(p->name, p->value.template cast<U>());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

// d(loss)/d(p) for every parameter in the store. Parameters the loss does not
// reach keep an all-zero gradient.
template <typename T>
void backward(Tape<T>& tape, typename Tape<T>::Id loss, ParamStore<T>& params) {
  params.zero_grads();
  tape.backward(loss);
}

// Uniform init in +-sqrt(6 / (fan_in + fan_out)); entries drawn row-major.
template <typename T>
Tensor<T> glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor<T> t = Tensor<T>::matrix(rows, cols);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Tensor<T> glorot_uniform_vec(std::size_t n, Rng& rng) {
  double bound = std::sqrt(6.0 / static_cast<double>(n + 1));
  Tensor<T> t = Tensor<T>::vector(n);
  for (std::size_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

}  // namespace dgn
