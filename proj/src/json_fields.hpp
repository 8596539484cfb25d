#pragma once

#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include <json.hpp>

#include "cogrisk/error.hpp"

namespace cogrisk::detail {

using nlohmann::json;

// Reads fields from a JSON object and rejects any key nobody asked for.
class JsonObject {
 public:
  JsonObject(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ValidationError(where_ + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const json& at(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) throw ValidationError(path(key) + ": missing required field");
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (!j_.contains(key)) return;
    out = convert<T>(at(key), path(key));
  }

  template <typename T>
  T require(const std::string& key) {
    return convert<T>(at(key), path(key));
  }

  std::string path(const std::string& key) const { return where_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ValidationError(where_ + ": unknown field '" + key + "'");
    }
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ValidationError(where + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ValidationError(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ValidationError(where + ": expected an unsigned integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ValidationError(where + ": expected an integer");
      return v.get<T>();
    } else {
      if (!v.is_number()) throw ValidationError(where + ": expected a number");
      const double d = v.get<double>();
      if (!std::isfinite(d)) throw ValidationError(where + ": expected a finite number");
      return static_cast<T>(d);
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace cogrisk::detail
