#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace fundus {

// Flat key=value configuration: a fixed registry of known keys with
// defaults, optionally overlaid by a config file ('#' comments) and then by
// command-line overrides. Unknown keys are rejected. `resolved()` renders
// the full effective configuration for reproducibility logging.
class RunConfig {
public:
    RunConfig(); // all registry defaults

    static const std::map<std::string, std::string>& registry();

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::size_t> get_sizes(const std::string& key) const;

    std::string resolved() const;

private:
    std::map<std::string, std::string> values_;
};

} // namespace fundus
