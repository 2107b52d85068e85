#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace shadowae {

/// Thrown for invalid or inconsistent configuration (bad ranges, unknown keys).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rejects keys of a JSON object that are not in `allowed`.
inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view context) {
  if (!j.is_object()) {
    throw ConfigError(std::string(context) + ": expected a JSON object");
  }
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) throw ConfigError(std::string(context) + ": unknown key \"" + key + "\"");
  }
}

/// Reads j[key] into out when present.
template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace shadowae
