#pragma once

#include <cstddef>
#include <cstdint>

#include "fairpipe/tabular.hpp"

namespace fairpipe {

struct BiasedFixtureOptions {
  std::size_t rows = 5000;
  std::uint64_t seed = 7;
  /// Logit shift applied to the privileged group's label.
  double label_bias = 1.6;
};

/// Synthetic hiring-style table with a binary `sex` column, a proxy feature
/// (`occupation`), group-dependent missingness and a label shifted in favor
/// of the majority group. Columns: age, sex, education, occupation,
/// hours_per_week, experience, test_score, outcome.
Table make_biased_fixture(const BiasedFixtureOptions& options = {});

}  // namespace fairpipe
