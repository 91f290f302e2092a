#include "qvr/bench/schema.hpp"

#include "qvr/error.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

namespace qvr::bench {

using nlohmann::json;

namespace {

const std::set<std::string> kKnown = {
    "$schema", "title", "description", "default", "$defs", "$ref",
    "type", "properties", "required", "additionalProperties", "enum", "const",
    "minimum", "maximum", "exclusiveMinimum", "exclusiveMaximum", "minLength",
    "items", "minItems", "maxItems", "oneOf",
};

bool has_type(const json& value, const std::string& type)
{
    if (type == "object") return value.is_object();
    if (type == "array") return value.is_array();
    if (type == "string") return value.is_string();
    if (type == "boolean") return value.is_boolean();
    if (type == "null") return value.is_null();
    if (type == "number") return value.is_number();
    if (type == "integer") {
        if (value.is_number_integer()) return true;
        // 1e7 written as a float is still an integer.
        return value.is_number_float() && std::isfinite(value.get<double>()) &&
               std::floor(value.get<double>()) == value.get<double>();
    }
    throw std::invalid_argument("schema: unknown type '" + type + "'");
}

std::string child(const std::string& path, const std::string& key) { return path + "/" + key; }

}  // namespace

SchemaValidator::SchemaValidator(json schema) : root_(std::move(schema))
{
    check_keywords(root_, "#");
}

void SchemaValidator::check_keywords(const json& node, const std::string& where) const
{
    if (!node.is_object()) throw std::invalid_argument("schema: " + where + " is not an object");
    for (const auto& [key, sub] : node.items()) {
        if (!kKnown.count(key)) throw std::invalid_argument("schema: unsupported keyword '" + key + "' at " + where);
        if (key == "properties" || key == "$defs") {
            for (const auto& [name, s] : sub.items()) check_keywords(s, child(child(where, key), name));
        } else if (key == "items") {
            check_keywords(sub, child(where, key));
        } else if (key == "oneOf") {
            for (std::size_t i = 0; i < sub.size(); ++i) check_keywords(sub[i], child(where, "oneOf/" + std::to_string(i)));
        } else if (key == "additionalProperties" && !sub.is_boolean()) {
            throw std::invalid_argument("schema: only boolean additionalProperties is supported");
        }
    }
}

const json& SchemaValidator::resolve(const json& node) const
{
    if (!node.contains("$ref")) return node;
    const auto ref = node["$ref"].get<std::string>();
    const std::string prefix = "#/$defs/";
    if (ref.rfind(prefix, 0) != 0) throw std::invalid_argument("schema: only local $defs references are supported");
    const auto name = ref.substr(prefix.size());
    if (!root_.contains("$defs") || !root_["$defs"].contains(name)) {
        throw std::invalid_argument("schema: dangling reference " + ref);
    }
    return resolve(root_["$defs"][name]);
}

void SchemaValidator::visit(const json& schema_in, const json& value, const std::string& path,
                            std::vector<std::string>& out) const
{
    const json& schema = resolve(schema_in);
    const std::string at = path.empty() ? "/" : path;

    if (schema.contains("oneOf")) {
        std::size_t matches = 0;
        std::vector<std::string> best;
        for (const auto& option : schema["oneOf"]) {
            std::vector<std::string> errs;
            visit(option, value, path, errs);
            if (errs.empty()) {
                ++matches;
            } else if (best.empty() || errs.size() < best.size()) {
                best = std::move(errs);
            }
        }
        if (matches == 0) {
            out.push_back(at + ": matches none of the allowed forms");
            out.insert(out.end(), best.begin(), best.end());
            return;
        }
        if (matches > 1) {
            out.push_back(at + ": matches more than one allowed form");
            return;
        }
    }
    if (schema.contains("type") && !has_type(value, schema["type"].get<std::string>())) {
        out.push_back(at + ": expected " + schema["type"].get<std::string>());
        return;
    }
    if (schema.contains("const") && value != schema["const"]) {
        out.push_back(at + ": must equal " + schema["const"].dump());
    }
    if (schema.contains("enum")) {
        bool found = false;
        for (const auto& e : schema["enum"]) found = found || e == value;
        if (!found) out.push_back(at + ": must be one of " + schema["enum"].dump());
    }
    if (value.is_number()) {
        const double v = value.get<double>();
        if (schema.contains("minimum") && !(v >= schema["minimum"].get<double>())) {
            out.push_back(at + ": must be >= " + schema["minimum"].dump());
        }
        if (schema.contains("maximum") && !(v <= schema["maximum"].get<double>())) {
            out.push_back(at + ": must be <= " + schema["maximum"].dump());
        }
        if (schema.contains("exclusiveMinimum") && !(v > schema["exclusiveMinimum"].get<double>())) {
            out.push_back(at + ": must be > " + schema["exclusiveMinimum"].dump());
        }
        if (schema.contains("exclusiveMaximum") && !(v < schema["exclusiveMaximum"].get<double>())) {
            out.push_back(at + ": must be < " + schema["exclusiveMaximum"].dump());
        }
    }
    if (value.is_string() && schema.contains("minLength") &&
        value.get<std::string>().size() < schema["minLength"].get<std::size_t>()) {
        out.push_back(at + ": string too short");
    }
    if (value.is_array()) {
        if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>()) {
            out.push_back(at + ": needs at least " + schema["minItems"].dump() + " items");
        }
        if (schema.contains("maxItems") && value.size() > schema["maxItems"].get<std::size_t>()) {
            out.push_back(at + ": allows at most " + schema["maxItems"].dump() + " items");
        }
        if (schema.contains("items")) {
            for (std::size_t i = 0; i < value.size(); ++i) visit(schema["items"], value[i], child(path, std::to_string(i)), out);
        }
    }
    if (value.is_object()) {
        if (schema.contains("required")) {
            for (const auto& key : schema["required"]) {
                if (!value.contains(key.get<std::string>())) out.push_back(at + ": missing required key '" + key.get<std::string>() + "'");
            }
        }
        const json empty = json::object();
        const json& props = schema.contains("properties") ? schema["properties"] : empty;
        const bool closed = schema.contains("additionalProperties") && !schema["additionalProperties"].get<bool>();
        for (const auto& [key, sub] : value.items()) {
            if (props.contains(key)) {
                visit(props[key], sub, child(path, key), out);
            } else if (closed) {
                out.push_back(at + ": unknown key '" + key + "'");
            }
        }
    }
}

std::vector<std::string> SchemaValidator::errors(const json& document) const
{
    std::vector<std::string> out;
    visit(root_, document, "", out);
    return out;
}

void SchemaValidator::validate(const json& document) const
{
    const auto errs = errors(document);
    if (errs.empty()) return;
    std::string msg = "configuration does not match the schema:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
}

}  // namespace qvr::bench
