#pragma once

// Internal helpers for strict JSON document parsing: every reader names the
// exact field path in its error message and rejects unknown keys.

#include <string>
#include <vector>

#include "json.hpp"

#include "charweave/errors.hpp"

namespace charweave::jsonutil {

using ordered_json = nlohmann::ordered_json;

inline ordered_json parse_document(const std::string& text, const std::string& what) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(what + ": " + e.what());
    }
}

inline void expect_object(const ordered_json& value, const std::string& path) {
    if (!value.is_object()) throw Error(path + ": expected an object");
}

inline void expect_array(const ordered_json& value, const std::string& path) {
    if (!value.is_array()) throw Error(path + ": expected an array");
}

inline void reject_unknown_keys(const ordered_json& object,
                                std::initializer_list<const char*> allowed,
                                const std::string& path) {
    for (const auto& item : object.items()) {
        bool known = false;
        for (const char* key : allowed) {
            if (item.key() == key) {
                known = true;
                break;
            }
        }
        if (!known) throw Error(path + "." + item.key() + ": unknown key");
    }
}

inline const ordered_json& require_key(const ordered_json& object, const char* key,
                                       const std::string& path) {
    const auto it = object.find(key);
    if (it == object.end()) throw Error(path + ": missing required key \"" + key + "\"");
    return *it;
}

inline std::string get_string(const ordered_json& value, const std::string& path) {
    if (!value.is_string()) throw Error(path + ": expected a string");
    return value.get<std::string>();
}

inline double get_number(const ordered_json& value, const std::string& path) {
    if (!value.is_number()) throw Error(path + ": expected a number");
    return value.get<double>();
}

inline std::vector<std::string> get_string_array(const ordered_json& value,
                                                 const std::string& path) {
    expect_array(value, path);
    std::vector<std::string> out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        out.push_back(get_string(value[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

inline std::vector<double> get_number_array(const ordered_json& value, const std::string& path) {
    expect_array(value, path);
    std::vector<double> out;
    out.reserve(value.size());
    for (std::size_t i = 0; i < value.size(); ++i) {
        out.push_back(get_number(value[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
}

}  // namespace charweave::jsonutil
