#include "medtest/tables.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

#include "medtest/calibrate.hpp"

namespace medtest {

namespace detail {
const char* builtin_table_csv();
}

const CriticalTable& builtin_table()
{
    static const CriticalTable table = [] {
        std::istringstream in(detail::builtin_table_csv());
        return CriticalTable::read_csv(in);
    }();
    return table;
}

std::optional<std::filesystem::path> cached_table_path(double epsilon)
{
    const char* dir = std::getenv(kCacheDirEnv);
    if (!dir || !*dir) return std::nullopt;
    char name[64];
    std::snprintf(name, sizeof name, "critical_table_eps%.0e.csv", epsilon);
    return std::filesystem::path(dir) / name;
}

CriticalTable default_table()
{
    if (auto path = cached_table_path(CalibrationConfig{}.epsilon)) {
        std::ifstream in(*path);
        if (in) return CriticalTable::read_csv(in);
    }
    return builtin_table();
}

double truncated_slope(double alpha)
{
    static std::mutex mutex;
    static std::map<double, double> cache;
    {
        std::lock_guard<std::mutex> lock(mutex);
        if (auto it = cache.find(alpha); it != cache.end()) return it->second;
    }
    const double b = optimal_b_truncated(alpha).b_opt;
    std::lock_guard<std::mutex> lock(mutex);
    cache.emplace(alpha, b);
    return b;
}

}  // namespace medtest
