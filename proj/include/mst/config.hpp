#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mst {

/// Flat key=value configuration with a fixed key registry. Unknown keys are a
/// usage error that lists the valid ones.
class AppConfig {
public:
    AppConfig();

    /// Parses "key=value" lines; '#' starts a comment, blank lines ignored.
    void load_file(const std::string& path);
    /// Applies one "key=value" override (--set).
    void set(const std::string& assignment);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_doubles(const std::string& key) const; // comma-separated

    /// Sorted key=value lines of everything explicitly set.
    std::vector<std::string> resolved_lines() const;

    static const std::vector<std::string>& valid_keys();

private:
    void put(const std::string& key, const std::string& value);
    std::map<std::string, std::string> values_;
};

} // namespace mst
