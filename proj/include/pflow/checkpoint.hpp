#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pflow/mlp.hpp"

namespace pflow {

inline constexpr int kCheckpointFormatVersion = 1;

// Checkpoint schema (JSON):
//   {"format_version": 1, "layer_widths": [...], "activation": "tanh"|"relu",
//    "values": [...]}
// values are written in shortest round-trip decimal form, so save -> load
// reproduces the parameters bit-for-bit.
inline void save_checkpoint(const std::filesystem::path& path, const ParamVector& params) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["layer_widths"] = params.arch.layer_widths;
  j["activation"] = to_string(params.arch.activation);
  j["values"] = params.values;
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out.good()) throw IoError("failed writing " + path.string());
}

inline ParamVector load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object())
    throw FormatError("not a valid checkpoint (bad JSON): " + path.string());
  for (const char* key : {"format_version", "layer_widths", "activation", "values"})
    if (!j.contains(key))
      throw FormatError("checkpoint " + path.string() + " missing field \"" + key + "\"");
  try {
    if (j["format_version"].get<int>() != kCheckpointFormatVersion)
      throw FormatError("checkpoint " + path.string() + " has unsupported format_version");
    MLPArchitecture arch;
    arch.layer_widths = j["layer_widths"].get<std::vector<int>>();
    arch.activation = activation_from_string(j["activation"].get<std::string>());
    arch.validate();
    ParamVector p{arch, j["values"].get<std::vector<double>>()};
    if (p.values.size() != arch.param_count())
      throw FormatError("checkpoint " + path.string() + " has " +
                        std::to_string(p.values.size()) + " values, architecture needs " +
                        std::to_string(arch.param_count()));
    for (double v : p.values)
      if (!std::isfinite(v))
        throw FormatError("checkpoint " + path.string() + " contains non-finite values");
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace pflow
