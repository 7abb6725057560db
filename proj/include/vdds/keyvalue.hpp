// Copyright (C) 2026 The vdds Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vdds/errors.hpp"

namespace vdds {

/// Flat `key = value` text: one pair per line, `#` starts a comment line,
/// surrounding whitespace is ignored, duplicate keys are rejected.
using KeyValues = std::map<std::string, std::string>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::pair<std::string, std::string> split_assignment(std::string_view line, const std::string& where) {
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    return {std::move(key), trim(line.substr(eq + 1))};
}

inline KeyValues parse_key_values(std::istream& in, const std::string& source) {
    KeyValues kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const std::string where = source + ":" + std::to_string(lineno);
        auto [key, value] = split_assignment(t, where);
        if (kv.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
        kv.emplace(std::move(key), std::move(value));
    }
    return kv;
}

inline KeyValues read_key_values(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path.string());
    return parse_key_values(in, path.string());
}

inline std::string format_key_values(const KeyValues& kv) {
    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

/// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

inline double parse_double(const std::string& key, const std::string& text) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("'" + key + "' expects a number, got '" + text + "'");
    }
}

inline long long parse_int(const std::string& key, const std::string& text) {
    long long v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end) {
        throw ConfigError("'" + key + "' expects an integer, got '" + text + "'");
    }
    return v;
}

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

/// Consumes keys from a KeyValues map; `finish` rejects anything left over.
class KeyReader {
public:
    KeyReader(KeyValues kv, std::string source) : kv_(std::move(kv)), source_(std::move(source)) {}

    bool has(const std::string& key) const { return kv_.contains(key); }

    std::string str(const std::string& key, const std::string& fallback) { return take(key).value_or(fallback); }
    std::string required(const std::string& key) {
        auto v = take(key);
        if (!v) throw ConfigError(source_ + ": missing required key '" + key + "'");
        return *v;
    }
    double real(const std::string& key, double fallback) {
        auto v = take(key);
        return v ? parse_double(key, *v) : fallback;
    }
    long long integer(const std::string& key, long long fallback) {
        auto v = take(key);
        return v ? parse_int(key, *v) : fallback;
    }
    std::vector<double> reals(const std::string& key, std::vector<double> fallback) {
        auto v = take(key);
        if (!v) return fallback;
        std::vector<double> out;
        for (const auto& item : split_list(*v)) out.push_back(parse_double(key, item));
        return out;
    }
    std::vector<long long> integers(const std::string& key, std::vector<long long> fallback) {
        auto v = take(key);
        if (!v) return fallback;
        std::vector<long long> out;
        for (const auto& item : split_list(*v)) out.push_back(parse_int(key, item));
        return out;
    }
    /// All keys under `prefix`, with the prefix stripped.
    std::map<std::string, std::string> prefixed(const std::string& prefix) {
        std::map<std::string, std::string> out;
        for (auto it = kv_.begin(); it != kv_.end();) {
            if (it->first.starts_with(prefix)) {
                out.emplace(it->first.substr(prefix.size()), it->second);
                it = kv_.erase(it);
            } else {
                ++it;
            }
        }
        return out;
    }

    void finish() const {
        if (kv_.empty()) return;
        std::string keys;
        for (const auto& [k, _] : kv_) keys += " '" + k + "'";
        throw ConfigError(source_ + ": unknown key(s)" + keys);
    }

private:
    std::optional<std::string> take(const std::string& key) {
        const auto it = kv_.find(key);
        if (it == kv_.end()) return std::nullopt;
        std::string v = it->second;
        kv_.erase(it);
        return v;
    }

    KeyValues kv_;
    std::string source_;
};

}  // namespace vdds
