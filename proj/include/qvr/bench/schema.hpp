#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace qvr::bench {

/*!
 * Validator for the subset of JSON Schema used by the shipped config
 * schemas: type, properties, required, additionalProperties (boolean),
 * enum, const, minimum/maximum and their exclusive forms, minLength, items,
 * minItems/maxItems, oneOf and local "#/$defs/..." references. Annotation
 * keywords (title, description, default, $schema) are ignored; any other
 * keyword is rejected when the schema is loaded so the subset cannot silently
 * drift.
 */
class SchemaValidator {
public:
    explicit SchemaValidator(nlohmann::json schema);

    /// Every violation, each prefixed with its JSON pointer.
    std::vector<std::string> errors(const nlohmann::json& document) const;

    /// Throws ConfigError listing the violations.
    void validate(const nlohmann::json& document) const;

private:
    void check_keywords(const nlohmann::json& node, const std::string& where) const;
    const nlohmann::json& resolve(const nlohmann::json& node) const;
    void visit(const nlohmann::json& schema, const nlohmann::json& value, const std::string& path,
               std::vector<std::string>& out) const;

    nlohmann::json root_;
};

}  // namespace qvr::bench
