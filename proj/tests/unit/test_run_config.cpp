// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>

#include "aad/error.hpp"
#include "aad/run_config.hpp"
#include "expect_error.hpp"
#include "test_util.hpp"

namespace aad::run {
namespace {

using test::code_of;

nlohmann::json minimal() {
  return {{"manifest", "data/manifest.json"}, {"target_phase", "early"}, {"lr", 1e-3},     {"beta1", 0.5},
          {"beta2", 0.999},                   {"epochs", 2},             {"batch_size", 4}, {"lambda_l1", 10}};
}

std::string schema_error(const nlohmann::json& doc) {
  try {
    parse_run_config(doc, "/base");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SchemaError);
    return e.what();
  }
  ADD_FAILURE() << "accepted " << doc.dump();
  return {};
}

TEST(Schema, EmbeddedCopiesMatchDocs) {
  for (const auto& [file, schema] : {std::pair{"run_config.schema.json", &run_config_schema()},
                                     std::pair{"metrics_report.schema.json", &metrics_report_schema()}}) {
    std::ifstream in(std::filesystem::path(AAD_SOURCE_DIR) / "docs" / file);
    ASSERT_TRUE(in) << file;
    EXPECT_EQ(nlohmann::json::parse(in), *schema) << file;
  }
}

TEST(RunConfig, MinimalDocument) {
  const RunConfig rc = parse_run_config(minimal(), "/base");
  EXPECT_EQ(rc.manifest, std::filesystem::path("/base/data/manifest.json"));
  EXPECT_TRUE(rc.val_manifest.empty());
  EXPECT_EQ(rc.train.beta1, 0.5);
  EXPECT_EQ(rc.train.epochs, 2);
  EXPECT_FALSE(rc.ablation);
}

TEST(RunConfig, PathsResolveAgainstConfigDirectory) {
  auto doc = minimal();
  doc["val_manifest"] = "/abs/val.json";
  doc["out"] = "../runs/a";
  const RunConfig rc = parse_run_config(doc, "/base/cfg");
  EXPECT_EQ(rc.val_manifest, std::filesystem::path("/abs/val.json"));
  EXPECT_EQ(rc.out.lexically_normal(), std::filesystem::path("/base/runs/a"));
}

TEST(RunConfig, MissingFieldIsNamed) {
  auto doc = minimal();
  doc.erase("lr");
  EXPECT_NE(schema_error(doc).find("/lr"), std::string::npos);
}

TEST(RunConfig, UnknownAndMistypedFields) {
  auto doc = minimal();
  doc["learning_rate"] = 0.1;
  EXPECT_NE(schema_error(doc).find("/learning_rate"), std::string::npos);
  doc = minimal();
  doc["epochs"] = "ten";
  EXPECT_NE(schema_error(doc).find("/epochs"), std::string::npos);
  doc = minimal();
  doc["lr"] = 0;
  EXPECT_NE(schema_error(doc).find("/lr"), std::string::npos);
  doc = minimal();
  doc["ensemble"] = "sum";
  EXPECT_NE(schema_error(doc).find("/ensemble"), std::string::npos);
  doc = minimal();
  doc["generator"] = {{"arch", "unet"}, {"depth_", 3}};
  EXPECT_NE(schema_error(doc).find("/generator/depth_"), std::string::npos);
}

TEST(RunConfig, AblationAxes) {
  auto doc = minimal();
  doc["ensemble"] = "add";
  doc["ablation"] = {{"ensembles", {"embed", "global_only"}}, {"seeds", {1, 2, 3}}};
  const RunConfig rc = parse_run_config(doc, "/");
  ASSERT_TRUE(rc.ablation);
  EXPECT_EQ(rc.ablation->ensembles, (std::vector{agg::EnsembleMode::embed, agg::EnsembleMode::global_only}));
  EXPECT_EQ(rc.ablation->adc, std::vector{train::AdcMode::real});
  EXPECT_EQ(rc.ablation->generators, std::vector{gen::Arch::resnet_encdec});
  EXPECT_EQ(rc.ablation->seeds, (std::vector<std::uint64_t>{1, 2, 3}));
  doc["ablation"].erase("seeds");
  EXPECT_NE(schema_error(doc).find("/ablation/seeds"), std::string::npos);
}

TEST(RunConfig, LoadFromFile) {
  const auto dir = test::scratch_dir("run_config");
  std::ofstream(dir / "c.json") << minimal().dump();
  EXPECT_EQ(load_run_config(dir / "c.json").manifest, dir / "data/manifest.json");
  std::ofstream(dir / "bad.json") << "{ nope";
  EXPECT_EQ(code_of([&] { load_run_config(dir / "bad.json"); }), ErrorCode::SchemaError);
  EXPECT_EQ(code_of([&] { load_run_config(dir / "none.json"); }), ErrorCode::IoFailure);
}

TEST(Schema, ValidatorKeywords) {
  const nlohmann::json schema = {
      {"type", "object"},
      {"required", {"a"}},
      {"additionalProperties", false},
      {"properties",
       {{"a", {{"type", "integer"}, {"minimum", 1}, {"maximum", 3}}},
        {"b", {{"type", "array"}, {"minItems", 1}, {"items", {{"type", "number"}, {"exclusiveMaximum", 1}}}}},
        {"c", {{"type", {"string", "null"}}, {"enum", {"x", nullptr}}}}}}};
  EXPECT_NO_THROW(validate_schema({{"a", 2}, {"b", {0.5}}, {"c", nullptr}}, schema));
  EXPECT_NO_THROW(validate_schema({{"a", 1}, {"c", "x"}}, schema));
  for (const nlohmann::json& bad : std::vector<nlohmann::json>{{{"a", 0}},
                                                               {{"a", 2.5}},
                                                               {{"a", 1}, {"b", nlohmann::json::array()}},
                                                               {{"a", 1}, {"b", {1.0}}},
                                                               {{"a", 1}, {"c", "y"}},
                                                               {{"a", 1}, {"d", 1}},
                                                               nlohmann::json::array()}) {
    EXPECT_EQ(code_of([&] { validate_schema(bad, schema); }), ErrorCode::SchemaError) << bad.dump();
  }
}

}  // namespace
}  // namespace aad::run
