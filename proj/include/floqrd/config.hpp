#pragma once

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "floqrd/errors.hpp"

namespace floqrd::config {

/// A configuration value: scalar, flat array, or row-major matrix.
using Value = std::variant<double, bool, std::string, std::vector<double>,
                           std::vector<std::vector<double>>>;

struct Entry {
    Value value;
    int line = 0;
};

struct Block {
    std::map<std::string, Entry> entries;
    int line = 0;

    bool has(const std::string& key) const { return entries.count(key) != 0; }

    const Value& at(const std::string& key) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw ConfigError(line, "missing key '" + key + "'");
        return it->second.value;
    }

    double number(const std::string& key) const {
        return expect<double>(key, "number");
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    bool boolean_or(const std::string& key, bool fallback) const {
        return has(key) ? expect<bool>(key, "boolean") : fallback;
    }
    std::string text(const std::string& key) const {
        return expect<std::string>(key, "string");
    }
    std::string text_or(const std::string& key, const std::string& fallback) const {
        return has(key) ? text(key) : fallback;
    }
    std::vector<double> array(const std::string& key) const {
        return expect<std::vector<double>>(key, "array");
    }
    std::vector<std::vector<double>> matrix(const std::string& key) const {
        return expect<std::vector<std::vector<double>>>(key, "matrix");
    }

    /// Strict schema check: every present key must be in `allowed`.
    void reject_unknown(const std::set<std::string>& allowed,
                        const std::string& block_name) const {
        for (const auto& [key, entry] : entries)
            if (allowed.count(key) == 0)
                throw ConfigError(entry.line,
                                  "unknown key '" + key + "' in block [" + block_name + "]");
    }

  private:
    template <class T>
    const T& expect(const std::string& key, const char* kind) const {
        auto it = entries.find(key);
        if (it == entries.end()) throw ConfigError(line, "missing key '" + key + "'");
        const T* p = std::get_if<T>(&it->second.value);
        if (!p) throw ConfigError(it->second.line, "key '" + key + "' is not a " + std::string(kind));
        return *p;
    }
};

struct Config {
    std::map<std::string, Block> blocks;

    bool has(const std::string& name) const { return blocks.count(name) != 0; }

    const Block& block(const std::string& name) const {
        auto it = blocks.find(name);
        if (it == blocks.end())
            throw ConfigError(0, "missing required block [" + name + "]");
        return it->second;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_number(const std::string& tok, int line) {
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(tok, &pos);
    } catch (const std::exception&) {
        throw ConfigError(line, "invalid number '" + tok + "'");
    }
    if (pos != tok.size()) throw ConfigError(line, "invalid number '" + tok + "'");
    return v;
}

// Splits a bracket-free comma list; empty input yields no tokens.
inline std::vector<std::string> split_commas(const std::string& s, int line) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char c : s) {
        if (c == '[') ++depth;
        if (c == ']') --depth;
        if (depth < 0) throw ConfigError(line, "unbalanced ']'");
        if (c == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (depth != 0) throw ConfigError(line, "unbalanced '['");
    cur = trim(cur);
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline Value parse_value(const std::string& raw, int line) {
    std::string s = trim(raw);
    if (s.empty()) throw ConfigError(line, "empty value");
    if (s == "true") return true;
    if (s == "false") return false;
    if (s.front() == '"') {
        if (s.size() < 2 || s.back() != '"')
            throw ConfigError(line, "unterminated string");
        return s.substr(1, s.size() - 2);
    }
    if (s.front() == '[') {
        if (s.back() != ']') throw ConfigError(line, "unterminated array");
        std::string inner = trim(s.substr(1, s.size() - 2));
        auto items = split_commas(inner, line);
        if (!items.empty() && items.front().front() == '[') {
            std::vector<std::vector<double>> rows;
            for (const auto& item : items) {
                if (item.front() != '[' || item.back() != ']')
                    throw ConfigError(line, "malformed matrix row '" + item + "'");
                std::vector<double> row;
                for (const auto& tok :
                     split_commas(trim(item.substr(1, item.size() - 2)), line))
                    row.push_back(parse_number(tok, line));
                rows.push_back(std::move(row));
            }
            return rows;
        }
        std::vector<double> arr;
        for (const auto& tok : items) arr.push_back(parse_number(tok, line));
        return arr;
    }
    return parse_number(s, line);
}

} // namespace detail

/// Parses the block-structured key-value format. Errors carry line numbers.
inline Config parse(const std::string& text) {
    Config cfg;
    Block* current = nullptr;
    std::string current_name;
    std::istringstream in(text);
    std::string rawline;
    int lineno = 0;
    while (std::getline(in, rawline)) {
        ++lineno;
        // strip comments, respecting quoted strings
        bool in_str = false;
        std::string stripped;
        for (char c : rawline) {
            if (c == '"') in_str = !in_str;
            if (c == '#' && !in_str) break;
            stripped += c;
        }
        std::string line = detail::trim(stripped);
        if (line.empty()) continue;
        if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
            current_name = detail::trim(line.substr(1, line.size() - 2));
            if (current_name.empty()) throw ConfigError(lineno, "empty block name");
            if (cfg.blocks.count(current_name))
                throw ConfigError(lineno, "duplicate block [" + current_name + "]");
            current = &cfg.blocks[current_name];
            current->line = lineno;
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(lineno, "expected 'key = value' or '[block]'");
        if (!current) throw ConfigError(lineno, "key outside of any block");
        std::string key = detail::trim(line.substr(0, eq));
        if (key.empty()) throw ConfigError(lineno, "empty key");
        if (current->has(key))
            throw ConfigError(lineno, "duplicate key '" + key + "' in [" + current_name + "]");
        current->entries[key] = Entry{detail::parse_value(line.substr(eq + 1), lineno), lineno};
    }
    return cfg;
}

inline std::string serialize_value(const Value& v) {
    std::ostringstream os;
    os.precision(17);
    if (const double* d = std::get_if<double>(&v)) {
        os << *d;
    } else if (const bool* b = std::get_if<bool>(&v)) {
        os << (*b ? "true" : "false");
    } else if (const std::string* s = std::get_if<std::string>(&v)) {
        os << '"' << *s << '"';
    } else if (const auto* arr = std::get_if<std::vector<double>>(&v)) {
        os << '[';
        for (std::size_t i = 0; i < arr->size(); ++i) os << (i ? ", " : "") << (*arr)[i];
        os << ']';
    } else if (const auto* mat = std::get_if<std::vector<std::vector<double>>>(&v)) {
        os << '[';
        for (std::size_t r = 0; r < mat->size(); ++r) {
            os << (r ? ", [" : "[");
            for (std::size_t i = 0; i < (*mat)[r].size(); ++i)
                os << (i ? ", " : "") << (*mat)[r][i];
            os << ']';
        }
        os << ']';
    }
    return os.str();
}

inline std::string serialize(const Config& cfg) {
    std::ostringstream os;
    for (const auto& [name, block] : cfg.blocks) {
        os << '[' << name << "]\n";
        for (const auto& [key, entry] : block.entries)
            os << key << " = " << serialize_value(entry.value) << '\n';
        os << '\n';
    }
    return os.str();
}

} // namespace floqrd::config
