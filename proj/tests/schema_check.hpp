#pragma once

// Just enough of JSON Schema to check the documents this repo emits against
// the schema it ships: type / enum / required / properties /
// additionalProperties / items / minItems / maxItems / oneOf and local
// "#/$defs/..." references. Returns human-readable "path: problem" strings.

#include <string>
#include <vector>

#include <json.hpp>

namespace schema_check {

using nlohmann::json;

inline bool type_matches(const json& value, const std::string& type) {
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "number") return value.is_number();
    if (type == "integer") return value.is_number_integer() || value.is_number_unsigned();
    return false;
}

inline void validate_node(const json& value, const json& schema, const json& root,
                          const std::string& path, std::vector<std::string>& errors);

inline const json* resolve_ref(const std::string& ref, const json& root) {
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) return nullptr;
    const auto& defs = root.at("$defs");
    const std::string name = ref.substr(prefix.size());
    if (!defs.contains(name)) return nullptr;
    return &defs.at(name);
}

inline void validate_node(const json& value, const json& schema, const json& root,
                          const std::string& path, std::vector<std::string>& errors) {
    if (schema.contains("$ref")) {
        const json* target = resolve_ref(schema.at("$ref").get<std::string>(), root);
        if (target == nullptr) {
            errors.push_back(path + ": unresolved $ref " + schema.at("$ref").get<std::string>());
            return;
        }
        validate_node(value, *target, root, path, errors);
        return;
    }
    if (schema.contains("oneOf")) {
        std::size_t matched = 0;
        std::vector<std::string> closest;
        for (const auto& alt : schema.at("oneOf")) {
            std::vector<std::string> sub;
            validate_node(value, alt, root, path, sub);
            if (sub.empty()) ++matched;
            if (closest.empty() || sub.size() < closest.size()) closest = std::move(sub);
        }
        if (matched != 1) {
            errors.push_back(path + ": " + std::to_string(matched) +
                             " of the oneOf alternatives matched");
            for (const auto& e : closest) errors.push_back("  nearest: " + e);
        }
        return;
    }
    if (schema.contains("type")) {
        const json& t = schema.at("type");
        bool ok = false;
        if (t.is_string()) {
            ok = type_matches(value, t.get<std::string>());
        } else {
            for (const auto& alt : t) ok = ok || type_matches(value, alt.get<std::string>());
        }
        if (!ok) {
            errors.push_back(path + ": type is " + std::string(value.type_name()) +
                             ", schema wants " + t.dump());
            return;
        }
    }
    if (schema.contains("enum")) {
        bool ok = false;
        for (const auto& allowed : schema.at("enum")) ok = ok || value == allowed;
        if (!ok) errors.push_back(path + ": " + value.dump() + " not in enum");
    }
    if (value.is_object()) {
        if (schema.contains("required"))
            for (const auto& key : schema.at("required"))
                if (!value.contains(key.get<std::string>()))
                    errors.push_back(path + ": missing required key " + key.get<std::string>());
        const json props =
            schema.contains("properties") ? schema.at("properties") : json::object();
        for (const auto& [key, sub] : value.items()) {
            if (props.contains(key)) {
                validate_node(sub, props.at(key), root, path + "/" + key, errors);
            } else if (schema.contains("additionalProperties")) {
                const json& extra = schema.at("additionalProperties");
                if (extra.is_boolean() && !extra.get<bool>())
                    errors.push_back(path + ": unexpected key " + key);
                else if (extra.is_object())
                    validate_node(sub, extra, root, path + "/" + key, errors);
            }
        }
    }
    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema.at("minItems").get<std::size_t>())
            errors.push_back(path + ": fewer than minItems entries");
        if (schema.contains("maxItems") && value.size() > schema.at("maxItems").get<std::size_t>())
            errors.push_back(path + ": more than maxItems entries");
        if (schema.contains("items")) {
            std::size_t i = 0;
            for (const auto& item : value)
                validate_node(item, schema.at("items"), root, path + "[" + std::to_string(i++) + "]",
                              errors);
        }
    }
}

// document vs the whole schema file (follows its top-level $ref)
inline std::vector<std::string> validate(const json& document, const json& schema_file) {
    std::vector<std::string> errors;
    validate_node(document, schema_file, schema_file, "$", errors);
    return errors;
}

// document vs one named $def inside the schema file
inline std::vector<std::string> validate_def(const json& document, const json& schema_file,
                                             const std::string& def) {
    std::vector<std::string> errors;
    validate_node(document, schema_file.at("$defs").at(def), schema_file, "$", errors);
    return errors;
}

}  // namespace schema_check
