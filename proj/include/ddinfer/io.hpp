#pragma once

#include "ddinfer/measures.hpp"

#include <filesystem>
#include <string>

namespace ddinfer {

/// Dataset CSV: header eps_1..eps_N,sigma_1..sigma_N,weight and one row per
/// atom, every number in shortest round-trip form. Metadata (partition, eps_h,
/// delta_h, c_star, R) goes to a sidecar `<path>.meta.json`.
void write_dataset(const std::filesystem::path& path, const EmpiricalMeasure& m, const std::string& generator = {});
EmpiricalMeasure read_dataset(const std::filesystem::path& path);

std::filesystem::path meta_path(const std::filesystem::path& dataset);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace ddinfer
