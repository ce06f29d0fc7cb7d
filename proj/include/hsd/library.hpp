#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hsd/cube.hpp"

namespace hsd {

enum class MaterialKind { Target, Confuser };

struct LibraryEntry {
    std::string name;
    MaterialKind kind = MaterialKind::Target;
    Eigen::VectorXd spectrum;
};

/// Named reference spectra on a shared wavelength axis.
class SpectralLibrary {
public:
    SpectralLibrary() = default;
    /// Validates: non-empty, unique names, finite values, every spectrum on the grid.
    SpectralLibrary(std::vector<double> wavelengths, std::vector<LibraryEntry> entries);

    const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
    const std::vector<LibraryEntry>& entries() const noexcept { return entries_; }
    Index bands() const noexcept { return static_cast<Index>(wavelengths_.size()); }

    const LibraryEntry* find(const std::string& name) const;
    /// Like `find` but throws InvalidArgument for unknown names.
    const LibraryEntry& at(const std::string& name) const;

private:
    std::vector<double> wavelengths_;
    std::vector<LibraryEntry> entries_;
};

/// Reads the comma-separated library format: header row
/// `wavelength_um,<name>...`, kind row `kind,target|confuser...`, then one
/// row per wavelength.
SpectralLibrary load_spectral_library(const std::filesystem::path& path);
void write_spectral_library(const SpectralLibrary& library, const std::filesystem::path& path);

/// Throws GridMismatch unless the library sits on the cube's band grid. Only
/// band counts are compared when the cube's wavelength axis was defaulted.
void check_grid(const SpectralLibrary& library, const HyperCube& cube, double tolerance_um = 1e-6);

/// Material stem of an entry name: the prefix before the first '-', '_' or
/// ':'. Distinct measurements of one material ("F8-a", "F8-b") share a stem.
std::string material_stem(const std::string& name);

} // namespace hsd
