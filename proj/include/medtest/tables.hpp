#pragma once

// Deployable critical tables: the built-in calibrated table, an optional
// on-disk cache, and cached truncated-test slopes.

#include <filesystem>
#include <optional>

#include "medtest/test_rules.hpp"

namespace medtest {

/// Environment variable naming a directory of cached calibrated tables.
inline constexpr const char* kCacheDirEnv = "MEDTEST_CACHE_DIR";

/// Table shipped with the library (epsilon = 1e-9, percentile levels).
const CriticalTable& builtin_table();

/// Cache file for the given epsilon under $MEDTEST_CACHE_DIR, if the variable
/// is set.
std::optional<std::filesystem::path> cached_table_path(double epsilon);

/// Cached table when present, otherwise the built-in one.
CriticalTable default_table();

/// Truncated-test slope b-bar(alpha), computed once per level per process.
double truncated_slope(double alpha);

}  // namespace medtest
