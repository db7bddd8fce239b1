#pragma once
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "kmarket/error.hpp"
#include "kmarket/inference.hpp"

namespace test {

inline std::filesystem::path source_dir() { return KMARKET_SOURCE_DIR; }

// Asserts that `expr` throws kmarket::Error with the given code.
#define CHECK_ERRC(expr, errc)                                  \
  do {                                                          \
    bool thrown_ = false;                                       \
    try {                                                       \
      (void)(expr);                                             \
    } catch (const kmarket::Error& e_) {                        \
      thrown_ = true;                                           \
      CHECK_MESSAGE(e_.code() == (errc), e_.what());            \
    }                                                           \
    CHECK_MESSAGE(thrown_, "expected " #errc " from " #expr);   \
  } while (0)

// Random joint table over n states and the aims {"o", "other"}; column "o" strictly positive.
inline kmarket::GenerativeModel random_model(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<kmarket::ModelState> states;
  std::vector<double> joint;
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    states.push_back({"s" + std::to_string(s), {}});
    joint.push_back(u(rng));
    joint.push_back(u(rng));
    total += joint[joint.size() - 2] + joint.back();
  }
  for (auto& v : joint) v /= total;
  return kmarket::GenerativeModel(std::move(states), {"o", "other"}, std::move(joint));
}

inline kmarket::GenerativeModel two_state_model() {
  // column "o" = (0.3, 0.2)
  return kmarket::GenerativeModel({{"s0", {}}, {"s1", {}}}, {"o", "other"}, {0.3, 0.2, 0.2, 0.3});
}

// Uniform draw from the probability simplex.
inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n) {
  std::exponential_distribution<double> e(1.0);
  std::vector<double> q(n);
  double z = 0.0;
  for (auto& v : q) z += (v = e(rng));
  for (auto& v : q) v /= z;
  return q;
}

}  // namespace test
