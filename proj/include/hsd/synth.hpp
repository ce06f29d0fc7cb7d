#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hsd/cube.hpp"
#include "hsd/library.hpp"

namespace hsd {

/// One planted rectangle. `center` plus `width` × `height` define the box;
/// for even sizes the center sits on the lower-index side of the middle.
struct PlantSpec {
    std::string library_name;
    PixelCoord center;
    int width = 1;
    int height = 1;
    double abundance = 1.0;
    /// Material this one imitates: a target name for confusers, or
    /// "background" for a camouflaged target (a background mixture plus a
    /// small residual of its own). Empty for an independent spectrum.
    std::string resembles;
    double similarity = 0.7;

    PixelCoord min_corner() const { return {center.line - (height - 1) / 2, center.sample - (width - 1) / 2}; }
    PixelCoord max_corner() const { return {min_corner().line + height - 1, min_corner().sample + width - 1}; }
};

struct SceneSpec {
    Index lines = 128;
    Index samples = 128;
    Index bands = 50;
    int background_endmembers = 3;
    double noise_sigma = 0.01;
    std::vector<PlantSpec> targets;
    std::vector<PlantSpec> confusers;
    /// Target materials emitted in the library without being planted.
    std::vector<std::string> library_only_targets;
    std::uint64_t seed = 0;
    double min_wavelength_um = 0.4;
    double max_wavelength_um = 2.5;
};

struct GroundTruthEntry {
    std::string label;
    MaterialKind kind = MaterialKind::Target;
    PixelCoord center;
    PixelCoord min_corner;
    PixelCoord max_corner;
    double abundance = 1.0;
    std::vector<PixelCoord> members;
};

struct GroundTruth {
    std::vector<GroundTruthEntry> entries;
};

struct Scene {
    HyperCube cube;
    SpectralLibrary library;
    GroundTruth truth;
};

/// Seeded synthetic scene: Dirichlet mixtures of smooth endmembers plus white
/// Gaussian noise, with planted rectangles mixed linearly into the local
/// background. One 64-bit Mersenne Twister stream drives everything, so the
/// spec fully determines the output.
Scene generate_scene(const SceneSpec& spec);

/// The repository's standard evaluation scene (also in data/standard_scene.json).
SceneSpec standard_scene_spec();

SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);
SceneSpec load_scene_spec(const std::filesystem::path& path);

/// CSV `label,kind,center_line,center_sample,min_line,min_sample,max_line,max_sample`.
void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path);
/// Reads truth.csv back; members are the filled rectangles.
GroundTruth load_truth_csv(const std::filesystem::path& path);

/// Writes `<stem>.hdr/.img`, `library.csv` and `truth.csv` into `dir`.
void write_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& stem = "scene");

} // namespace hsd
