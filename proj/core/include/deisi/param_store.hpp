#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "deisi/tensor.hpp"

namespace deisi {

// Named parameter tensors in registration order. Shapes are fixed once added;
// registration order defines the checkpoint payload order.
class ParamStore {
 public:
  void add(const std::string& name, Tensor t) {
    if (index_.count(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
    index_[name] = order_.size();
    order_.push_back(name);
    values_.push_back(std::move(t));
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return values_[it->second];
  }

  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("ParamStore: unknown parameter " + name);
    return values_[it->second];
  }

  void set(const std::string& name, Tensor t) {
    Tensor& cur = at(name);
    if (!cur.same_shape(t))
      throw std::invalid_argument("ParamStore: shape change for " + name + " from " +
                                  cur.shape_str() + " to " + t.shape_str());
    cur = std::move(t);
  }

  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& t : values_) n += t.size();
    return n;
  }

 private:
  std::vector<std::string> order_;
  std::vector<Tensor> values_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Deterministic, platform-stable RNG helpers used for parameter init and
// every seeded shuffle in the project.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0,1) built from the top 53 bits, identical on any platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

  std::uint64_t fork() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace deisi
