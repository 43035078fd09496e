#pragma once

// Flat key = value configuration with [section] headers. Keys before the
// first header belong to the unnamed top-level section. '#' starts a comment.
// Every key must be consumed by the reader; leftovers are rejected.

#include "orbm/common.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace orbm {

class ConfigError : public Error {
public:
    using Error::Error;
};

class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static Config parse(const std::string& text, const std::string& origin = "<config>");
    static Config load(const std::string& path);

    const std::string& origin() const { return origin_; }
    bool has(const std::string& section, const std::string& key) const;
    bool has_section(const std::string& section) const;

    /// Typed getters; the key counts as consumed once read.
    std::optional<std::string> get_string(const std::string& section, const std::string& key) const;
    std::optional<double> get_double(const std::string& section, const std::string& key) const;
    std::optional<long> get_long(const std::string& section, const std::string& key) const;
    std::optional<std::uint64_t> get_u64(const std::string& section, const std::string& key) const;
    std::optional<bool> get_bool(const std::string& section, const std::string& key) const;
    /// Comma-separated reals.
    std::optional<Vec> get_vector(const std::string& section, const std::string& key) const;
    std::optional<std::vector<double>> get_list(const std::string& section, const std::string& key) const;
    /// Rows separated by ';', entries by ','.
    std::optional<Mat> get_matrix(const std::string& section, const std::string& key) const;

    std::string require_string(const std::string& section, const std::string& key) const;
    double require_double(const std::string& section, const std::string& key) const;
    long require_long(const std::string& section, const std::string& key) const;

    /// Marks every key of a section as consumed.
    void consume_section(const std::string& section) const;
    /// Throws ConfigError listing unread keys with their line numbers.
    void reject_unknown() const;

    void set(const std::string& section, const std::string& key, const std::string& value);

    /// Canonical text: sections in name order, keys sorted.
    std::string echo() const;

private:
    std::string origin_;
    std::map<std::string, std::map<std::string, Entry>> data_;
    mutable std::set<std::pair<std::string, std::string>> used_;

    const Entry* find(const std::string& section, const std::string& key) const;
    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const;
};

}  // namespace orbm
