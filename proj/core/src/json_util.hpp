#pragma once

#include <ckdpipe/error.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

namespace ckdpipe::detail {

/// Throws SchemaError when `j` is not an object or has a key outside `allowed`.
inline void require_keys(const nlohmann::json& j, std::string_view what,
                         std::initializer_list<std::string_view> allowed) {
    if (!j.is_object()) {
        throw SchemaError(std::string(what) + ": expected an object");
    }
    for (const auto& item : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
            throw SchemaError(std::string(what) + ": unknown key '" + item.key() + "'");
        }
    }
}

template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out) {
    if (const auto it = j.find(key); it != j.end()) {
        it->get_to(out);
    }
}

} // namespace ckdpipe::detail
