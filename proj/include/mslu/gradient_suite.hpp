#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mslu/gradcheck.hpp"

namespace mslu {

struct GradientSuiteConfig {
  std::size_t labels = 6;    // k
  std::size_t features = 8;  // m
  std::size_t vocab = 12;
  std::size_t hidden = 4;
  std::size_t attention = 4;
  std::size_t sentence_length = 5;
  std::uint64_t seed = 1;
  double tolerance = 1e-5;
  GradCheckOptions check{5e-3, 1e-12, Stencil::SixPoint};
};

struct GradientSuiteEntry {
  std::string component;
  GradCheckReport report;
  bool passed = false;
};

// Gradient checks of every differentiable component on a random small
// configuration: both encoders, the tagger loss, the policy mask
// log-probability over two chained rounds, the reward and the reward
// objective difference.
std::vector<GradientSuiteEntry> run_gradient_suite(const GradientSuiteConfig& config = {});

}  // namespace mslu
