#pragma once

#include <cstdint>
#include <string>

#include "waydcm/choice.hpp"
#include "waydcm/model.hpp"
#include "waydcm/synthgen.hpp"
#include "waydcm/train.hpp"
#include "waydcm/version.hpp"

namespace waydcm {

// One serializable document covering every knob of a run. The top-level seed
// and variant are the single source of truth; reconcile() mirrors them (and
// the shared geometry) into the nested module configs.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string out_dir = "out";
  Variant variant = Variant::WayDCM2;
  bool standardize = true;
  GridSpec grid;
  ColliderParams collider;
  InteractionSpace box;
  SocialGridSpec social;
  ModelConfig model;
  TrainConfig train;
  FitOptions fit;
  GenConfig gen;
};

// Copies the shared fields into the nested structs so every module sees one
// consistent view. Call after any field override.
void reconcile(RunConfig& config);

// Strict parse: a key outside the schema fails with a ConfigError naming it,
// at every nesting level. Absent keys keep their defaults.
RunConfig run_config_from_json_text(const std::string& text);
RunConfig load_run_config(const std::string& path);

// Canonical dump of the effective configuration (all schema fields present,
// keys sorted). Parsing it back reproduces the config exactly.
std::string run_config_to_json_text(const RunConfig& config);

// 64-bit FNV-1a over the canonical dump.
std::uint64_t config_hash(const RunConfig& config);

// Comment line ("# config_hash=... seed=... version=...") prefixed to every
// generated report so outputs are traceable to their settings.
std::string config_stamp(const RunConfig& config);

}  // namespace waydcm
