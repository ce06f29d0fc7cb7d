#pragma once

#include <filesystem>

#include "hsd/pca.hpp"

namespace hsd {

/// Binary sidecar layout, all little-endian:
///   "HSWM" | u32 version (=1) | u64 k | u64 bands |
///   f64 mean[bands] | f64 eigenvalues[k] | f64 W[bands*k] (column-major)
inline constexpr std::uint32_t kWhiteningFormatVersion = 1;

void save_whitening_model(const WhiteningModel<double>& model, const std::filesystem::path& path);
WhiteningModel<double> load_whitening_model(const std::filesystem::path& path);

} // namespace hsd
