#include "glacier/keyvalue.hpp"

#include <fstream>
#include <sstream>

#include "glacier/error.hpp"

namespace glacier {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        require(eq != std::string::npos, ErrorCode::invalid_config,
                "line " + std::to_string(lineno) + ": expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        require(!key.empty(), ErrorCode::invalid_config,
                "line " + std::to_string(lineno) + ": empty key");
        cfg.values_[key] = trim(line.substr(eq + 1));
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open config " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
    if (const auto it = values_.find(key); it != values_.end()) {
        return it->second;
    }
    return std::nullopt;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const double d = std::stod(*v, &used);
        require(used == v->size(), ErrorCode::invalid_config, "trailing characters");
        return d;
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::invalid_config, "key '" + key + "' is not a number: " + *v);
    }
}

std::int64_t KeyValueConfig::get_int(const std::string& key, std::int64_t fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    try {
        std::size_t used = 0;
        const auto i = std::stoll(*v, &used);
        require(used == v->size(), ErrorCode::invalid_config, "trailing characters");
        return i;
    } catch (const std::logic_error&) {
        throw Error(ErrorCode::invalid_config, "key '" + key + "' is not an integer: " + *v);
    }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") {
        return true;
    }
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") {
        return false;
    }
    throw Error(ErrorCode::invalid_config, "key '" + key + "' is not a boolean: " + *v);
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
    std::vector<double> out;
    const auto v = get(key);
    if (!v) {
        return out;
    }
    std::string s = *v;
    for (auto& ch : s) {
        if (ch == ',') {
            ch = ' ';
        }
    }
    std::istringstream in(s);
    std::string tok;
    while (in >> tok) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::invalid_config, "key '" + key + "' has a non-numeric entry: " + tok);
        }
    }
    return out;
}

}  // namespace glacier
