#pragma once

// Raw matrix container: <stem>.f64 holds little-endian IEEE doubles in
// row-major order, <stem>.json is a sidecar describing the shape.

#include <filesystem>

#include <Eigen/Dense>
#include <json.hpp>

namespace autocal {

/// Writes <stem>.f64 and <stem>.json. `extra` keys are merged into the sidecar.
void write_f64(const std::filesystem::path& stem, const Eigen::MatrixXd& m, const nlohmann::json& extra = {});

/// Reads a container written by write_f64. If `sidecar` is given, the parsed
/// sidecar is stored there.
Eigen::MatrixXd read_f64(const std::filesystem::path& stem, nlohmann::json* sidecar = nullptr);

/// Writes a JSON document with stable formatting.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace autocal
