#include "schema_check.h"

namespace daca::testing {
namespace {

using nlohmann::json;

bool MatchesType(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

class Validator {
 public:
  explicit Validator(const json& root) : root_(root) {}

  void Check(const json& v, const json& schema, const std::string& path) {
    if (schema.contains("$ref")) {
      const std::string ref = schema["$ref"];
      const std::string prefix = "#/definitions/";
      if (ref.rfind(prefix, 0) != 0) {
        errors.push_back(path + ": unsupported $ref " + ref);
        return;
      }
      Check(v, root_["definitions"][ref.substr(prefix.size())], path);
      return;
    }
    if (schema.contains("oneOf")) {
      int matches = 0;
      for (const auto& option : schema["oneOf"]) {
        Validator sub(root_);
        sub.Check(v, option, path);
        if (sub.errors.empty()) ++matches;
      }
      if (matches != 1) errors.push_back(path + ": matches " + std::to_string(matches) + " oneOf branches");
    }
    if (schema.contains("type")) {
      bool ok = false;
      if (schema["type"].is_array()) {
        for (const auto& t : schema["type"]) ok = ok || MatchesType(v, t);
      } else {
        ok = MatchesType(v, schema["type"]);
      }
      if (!ok) {
        errors.push_back(path + ": type mismatch, expected " + schema["type"].dump());
        return;
      }
    }
    if (schema.contains("enum")) {
      bool found = false;
      for (const auto& e : schema["enum"]) found = found || e == v;
      if (!found) errors.push_back(path + ": value " + v.dump() + " not in enum");
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (schema.contains("minimum") && x < schema["minimum"].get<double>()) {
        errors.push_back(path + ": below minimum");
      }
      if (schema.contains("maximum") && x > schema["maximum"].get<double>()) {
        errors.push_back(path + ": above maximum");
      }
      if (schema.contains("exclusiveMinimum") && !(x > schema["exclusiveMinimum"].get<double>())) {
        errors.push_back(path + ": not above exclusiveMinimum");
      }
    }
    if (v.is_object()) {
      if (schema.contains("required")) {
        for (const auto& key : schema["required"]) {
          if (!v.contains(key.get<std::string>())) {
            errors.push_back(path + ": missing required '" + key.get<std::string>() + "'");
          }
        }
      }
      const json props = schema.value("properties", json::object());
      for (const auto& [key, child] : v.items()) {
        if (props.contains(key)) {
          Check(child, props[key], path + "/" + key);
        } else if (schema.contains("additionalProperties") &&
                   schema["additionalProperties"] == false) {
          errors.push_back(path + ": unexpected property '" + key + "'");
        }
      }
    }
    if (v.is_array()) {
      if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
        errors.push_back(path + ": fewer than minItems");
      }
      if (schema.contains("items")) {
        for (std::size_t i = 0; i < v.size(); ++i) {
          Check(v[i], schema["items"], path + "/" + std::to_string(i));
        }
      }
    }
  }

  std::vector<std::string> errors;

 private:
  const json& root_;
};

}  // namespace

std::vector<std::string> ValidateAgainstSchema(const nlohmann::json& instance,
                                               const nlohmann::json& schema) {
  Validator v(schema);
  v.Check(instance, schema, "");
  return v.errors;
}

}  // namespace daca::testing
