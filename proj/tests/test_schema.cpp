// SPDX-License-Identifier: Apache-2.0
#include "fama/schema.hpp"

#include <gtest/gtest.h>

using namespace fama;

namespace
{

const Json kSchema = Json::parse(R"({
  "type": "object",
  "required": ["order_id", "count"],
  "properties": {
    "order_id": {"type": "string", "minLength": 2},
    "count": {"type": "integer", "minimum": 1, "maximum": 5},
    "mode": {"enum": ["fast", "slow"]},
    "tags": {"type": "array", "items": {"type": "string"}, "minItems": 1}
  },
  "additionalProperties": false
})");

} // namespace

TEST(Schema, AcceptsValidDocument)
{
    EXPECT_TRUE(validateSchema(Json::parse(R"({"order_id": "O1", "count": 3, "tags": ["a"]})"), kSchema).empty());
}

TEST(Schema, ReportsMissingRequiredWithPointer)
{
    auto const problems = validateSchema(Json::parse(R"({"order_id": "O1"})"), kSchema);
    ASSERT_EQ(problems.size(), 1u);
    EXPECT_NE(problems[0].find("count"), std::string::npos);
}

TEST(Schema, RejectsWrongTypesBoundsAndExtras)
{
    auto const doc = Json::parse(R"({"order_id": "O", "count": 9, "mode": "medium", "tags": [1], "x": 0})");
    auto const problems = validateSchema(doc, kSchema);
    EXPECT_EQ(problems.size(), 5u);
    bool pointerSeen = false;
    for (const auto& p: problems)
        pointerSeen = pointerSeen || p.rfind("/tags/0", 0) == 0;
    EXPECT_TRUE(pointerSeen);
}

TEST(Schema, IntegerRejectsFractionsButNumberAccepts)
{
    EXPECT_FALSE(validateSchema(Json(1.5), Json{{"type", "integer"}}).empty());
    EXPECT_TRUE(validateSchema(Json(1.5), Json{{"type", "number"}}).empty());
    EXPECT_TRUE(validateSchema(Json(2), Json{{"type", "number"}}).empty());
}

TEST(Schema, TypeListAndConst)
{
    Json const schema = {{"type", {"string", "null"}}};
    EXPECT_TRUE(validateSchema(Json(), schema).empty());
    EXPECT_FALSE(validateSchema(Json(3), schema).empty());
    EXPECT_FALSE(validateSchema(Json("b"), Json{{"const", "a"}}).empty());
}
