// Copyright 2026 The AAD-DCE Authors
// SPDX-License-Identifier: Apache-2.0

#include "aad/run_config.hpp"

#include <fstream>

#include "aad/error.hpp"
#include "schemas.hpp"

namespace aad::run {

const nlohmann::json& run_config_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(detail::kRunConfigSchema);
  return schema;
}

const nlohmann::json& metrics_report_schema() {
  static const nlohmann::json schema = nlohmann::json::parse(detail::kMetricsReportSchema);
  return schema;
}

namespace {

bool has_type(const nlohmann::json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  throw Error(ErrorCode::SchemaError, "schema uses unsupported type '" + type + "'");
}

[[noreturn]] void fail(const std::string& pointer, const std::string& what) {
  throw Error(ErrorCode::SchemaError, "field '" + (pointer.empty() ? std::string("/") : pointer) + "': " + what);
}

void check(const nlohmann::json& v, const nlohmann::json& s, const std::string& ptr) {
  if (s.contains("type")) {
    const auto& t = s.at("type");
    bool ok = false;
    if (t.is_array()) {
      for (const auto& e : t) ok = ok || has_type(v, e.get<std::string>());
    } else {
      ok = has_type(v, t.get<std::string>());
    }
    if (!ok) fail(ptr, "expected type " + t.dump() + ", got " + v.type_name());
  }
  if (s.contains("enum")) {
    bool ok = false;
    for (const auto& e : s.at("enum")) ok = ok || e == v;
    if (!ok) fail(ptr, "value " + v.dump() + " not one of " + s.at("enum").dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s.at("minimum").get<double>()) fail(ptr, "must be >= " + s.at("minimum").dump());
    if (s.contains("maximum") && x > s.at("maximum").get<double>()) fail(ptr, "must be <= " + s.at("maximum").dump());
    if (s.contains("exclusiveMinimum") && x <= s.at("exclusiveMinimum").get<double>()) {
      fail(ptr, "must be > " + s.at("exclusiveMinimum").dump());
    }
    if (s.contains("exclusiveMaximum") && x >= s.at("exclusiveMaximum").get<double>()) {
      fail(ptr, "must be < " + s.at("exclusiveMaximum").dump());
    }
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& r : s.at("required")) {
        if (!v.contains(r.get<std::string>())) fail(ptr + "/" + r.get<std::string>(), "required field missing");
      }
    }
    const nlohmann::json props = s.value("properties", nlohmann::json::object());
    const bool closed = s.contains("additionalProperties") && s.at("additionalProperties") == false;
    for (const auto& [key, val] : v.items()) {
      if (props.contains(key)) {
        check(val, props.at(key), ptr + "/" + key);
      } else if (closed) {
        fail(ptr + "/" + key, "unknown field");
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s.at("minItems").get<std::size_t>()) {
      fail(ptr, "needs at least " + s.at("minItems").dump() + " items");
    }
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) check(v[i], s.at("items"), ptr + "/" + std::to_string(i));
    }
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

void validate_schema(const nlohmann::json& doc, const nlohmann::json& schema) { check(doc, schema, ""); }

RunConfig parse_run_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  validate_schema(doc, run_config_schema());
  RunConfig rc;
  nlohmann::json train = doc;
  for (const char* key : {"manifest", "val_manifest", "out", "checkpoint_every", "ablation"}) train.erase(key);
  rc.train = train::train_config_from_json(train);
  rc.manifest = resolve(base_dir, doc.at("manifest").get<std::string>());
  if (doc.contains("val_manifest")) rc.val_manifest = resolve(base_dir, doc.at("val_manifest").get<std::string>());
  if (doc.contains("out")) rc.out = resolve(base_dir, doc.at("out").get<std::string>());
  rc.checkpoint_every = doc.value("checkpoint_every", 0);
  if (doc.contains("ablation")) {
    const auto& a = doc.at("ablation");
    AblationAxes axes;
    for (const auto& e : a.value("ensembles", nlohmann::json::array({std::string(agg::to_string(rc.train.ensemble))}))) {
      axes.ensembles.push_back(agg::ensemble_from_string(e.get<std::string>()));
    }
    for (const auto& e : a.value("adc", nlohmann::json::array({std::string(train::to_string(rc.train.adc))}))) {
      axes.adc.push_back(train::adc_mode_from_string(e.get<std::string>()));
    }
    for (const auto& e :
         a.value("generators", nlohmann::json::array({std::string(gen::to_string(rc.train.generator.arch))}))) {
      axes.generators.push_back(gen::arch_from_string(e.get<std::string>()));
    }
    for (const auto& e : a.at("seeds")) axes.seeds.push_back(e.get<std::uint64_t>());
    rc.ablation = std::move(axes);
  }
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(doc, path.parent_path());
}

}  // namespace aad::run
