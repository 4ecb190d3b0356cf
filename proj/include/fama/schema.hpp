// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fama/json_util.hpp"

#include <string>
#include <vector>

namespace fama
{

/// Validates `value` against a JSON Schema using the draft-07 keywords this
/// project relies on: type, properties, required, additionalProperties
/// (boolean or schema), items, enum, const, minimum, maximum, minItems,
/// minLength, minProperties. Returns one message per violation, each
/// prefixed with a JSON pointer to the offending value.
[[nodiscard]] std::vector<std::string> validateSchema(const Json& value, const Json& schema);

} // namespace fama
