// SPDX-License-Identifier: Apache-2.0
#include "fama/schema.hpp"

#include <algorithm>

namespace fama
{

namespace
{

bool matchesType(const Json& value, const std::string& type)
{
    if (type == "object")
        return value.is_object();
    if (type == "array")
        return value.is_array();
    if (type == "string")
        return value.is_string();
    if (type == "integer")
        return value.is_number_integer()
               || (value.is_number_float() && value.get<double>() == static_cast<double>(static_cast<long long>(value.get<double>())));
    if (type == "number")
        return value.is_number();
    if (type == "boolean")
        return value.is_boolean();
    if (type == "null")
        return value.is_null();
    return true;
}

void validateAt(const Json& value, const Json& schema, const std::string& pointer, std::vector<std::string>& errors)
{
    if (!schema.is_object())
        return;
    auto where = pointer.empty() ? std::string("/") : pointer;

    if (schema.contains("type"))
    {
        const auto& type = schema["type"];
        bool ok = false;
        if (type.is_string())
            ok = matchesType(value, type.get<std::string>());
        else if (type.is_array())
            ok = std::any_of(type.begin(), type.end(), [&](const Json& t) { return matchesType(value, t.get<std::string>()); });
        if (!ok)
        {
            errors.push_back(where + ": expected type " + type.dump());
            return;
        }
    }
    if (schema.contains("enum")
        && std::none_of(schema["enum"].begin(), schema["enum"].end(), [&](const Json& e) { return e == value; }))
        errors.push_back(where + ": value " + value.dump() + " not in enum");
    if (schema.contains("const") && schema["const"] != value)
        errors.push_back(where + ": value must equal " + schema["const"].dump());

    if (value.is_number())
    {
        if (schema.contains("minimum") && value.get<double>() < schema["minimum"].get<double>())
            errors.push_back(where + ": below minimum " + schema["minimum"].dump());
        if (schema.contains("maximum") && value.get<double>() > schema["maximum"].get<double>())
            errors.push_back(where + ": above maximum " + schema["maximum"].dump());
    }
    if (value.is_string() && schema.contains("minLength")
        && value.get<std::string>().size() < schema["minLength"].get<std::size_t>())
        errors.push_back(where + ": shorter than minLength");

    if (value.is_object())
    {
        if (schema.contains("minProperties") && value.size() < schema["minProperties"].get<std::size_t>())
            errors.push_back(where + ": fewer than minProperties");
        for (const auto& key: schema.value("required", Json::array()))
            if (!value.contains(key.get<std::string>()))
                errors.push_back(where + ": missing required property '" + key.get<std::string>() + "'");

        const auto properties = schema.value("properties", Json::object());
        for (auto it = value.begin(); it != value.end(); ++it)
        {
            auto const child = pointer + "/" + it.key();
            if (properties.contains(it.key()))
            {
                validateAt(it.value(), properties[it.key()], child, errors);
            }
            else if (schema.contains("additionalProperties"))
            {
                const auto& extra = schema["additionalProperties"];
                if (extra.is_boolean() && !extra.get<bool>())
                    errors.push_back(child + ": unexpected property");
                else if (extra.is_object())
                    validateAt(it.value(), extra, child, errors);
            }
        }
    }

    if (value.is_array())
    {
        if (schema.contains("minItems") && value.size() < schema["minItems"].get<std::size_t>())
            errors.push_back(where + ": fewer than minItems");
        if (schema.contains("items"))
            for (std::size_t i = 0; i < value.size(); ++i)
                validateAt(value[i], schema["items"], pointer + "/" + std::to_string(i), errors);
    }
}

} // namespace

std::vector<std::string> validateSchema(const Json& value, const Json& schema)
{
    std::vector<std::string> errors;
    validateAt(value, schema, "", errors);
    return errors;
}

} // namespace fama
