#pragma once

// Minimal INI-style configuration reader for experiment files:
//
//   # comment
//   key = value            (top-level keys live in the unnamed section "")
//   [section]
//   [section.subname]      (dots are allowed; the name is kept verbatim)
//   list = 1, 2, 3
//
// Section order and key order within a section are preserved, because the
// experiment runner executes attack sections in file order.

#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "margin/errors.hpp"

namespace margin {

namespace detail {
inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
} // namespace detail

struct ConfigSection {
    std::string name;
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return true;
        return false;
    }
    const std::string& raw(const std::string& key) const {
        for (const auto& [k, v] : entries)
            if (k == key) return v;
        throw ConfigError("config: missing key '" + key + "' in section [" + name + "]");
    }
    std::string get_string(const std::string& key) const { return raw(key); }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? raw(key) : fallback;
    }
    double get_double(const std::string& key) const { return parse_double(key, raw(key)); }
    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }
    long long get_int(const std::string& key) const { return parse_int(key, raw(key)); }
    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }
    bool get_bool(const std::string& key) const {
        const std::string& v = raw(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ConfigError("config: key '" + key + "' in [" + name + "] is not a boolean: " + v);
    }
    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? get_bool(key) : fallback;
    }
    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        std::istringstream in(raw(key));
        std::string item;
        while (std::getline(in, item, ',')) {
            item = detail::trim(item);
            if (item.empty()) continue;
            out.push_back(parse_double(key, item));
        }
        return out;
    }
    std::vector<int> get_int_list(const std::string& key) const {
        std::vector<int> out;
        for (double v : get_double_list(key)) out.push_back(static_cast<int>(v));
        return out;
    }

private:
    double parse_double(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            double d = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return d;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' in [" + name + "] is not a number: " + v);
        }
    }
    long long parse_int(const std::string& key, const std::string& v) const {
        try {
            std::size_t used = 0;
            long long i = std::stoll(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return i;
        } catch (const std::exception&) {
            throw ConfigError("config: key '" + key + "' in [" + name + "] is not an integer: " + v);
        }
    }
};

struct ConfigFile {
    std::vector<ConfigSection> sections; // sections[0] is always the unnamed top level

    const ConfigSection* find(const std::string& name) const {
        for (const ConfigSection& s : sections)
            if (s.name == name) return &s;
        return nullptr;
    }
    const ConfigSection& require(const std::string& name) const {
        const ConfigSection* s = find(name);
        if (!s) throw ConfigError("config: missing section [" + name + "]");
        return *s;
    }
    const ConfigSection& top() const { return sections.front(); }
};

inline ConfigFile parse_config(std::istream& in) {
    ConfigFile cfg;
    cfg.sections.push_back({});
    ConfigSection* current = &cfg.sections.back();
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("config: unterminated section header on line " +
                                  std::to_string(line_no));
            std::string name = detail::trim(s.substr(1, s.size() - 2));
            if (name.empty())
                throw ConfigError("config: empty section name on line " + std::to_string(line_no));
            cfg.sections.push_back({name, {}});
            current = &cfg.sections.back();
            continue;
        }
        std::size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value on line " + std::to_string(line_no));
        std::string key = detail::trim(s.substr(0, eq));
        std::string value = detail::trim(s.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config: empty key on line " + std::to_string(line_no));
        current->entries.emplace_back(std::move(key), std::move(value));
    }
    return cfg;
}

inline ConfigFile parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    return parse_config(in);
}

} // namespace margin
