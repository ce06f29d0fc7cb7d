#include "hsd/synth.hpp"

#include "hsd/identify.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace hsd {
namespace {

// Distribution helpers on top of mt19937_64 (whose output sequence is fixed
// by the standard, unlike the <random> distributions).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // uniform on (0, 1]
    double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double theta = 2.0 * std::numbers::pi * uniform();
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double exponential() { return -std::log(uniform()); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Cumulative sum of moving-average-filtered white noise, min-max normalized to [0, 1].
Eigen::VectorXd smooth_spectrum(Rng& rng, Index bands) {
    Eigen::VectorXd noise(bands);
    for (Index b = 0; b < bands; ++b) noise(b) = rng.normal();
    const Index half = std::max<Index>(1, bands / 20);
    Eigen::VectorXd filtered(bands);
    for (Index b = 0; b < bands; ++b) {
        const Index lo = std::max<Index>(0, b - half), hi = std::min(bands - 1, b + half);
        filtered(b) = noise.segment(lo, hi - lo + 1).mean();
    }
    Eigen::VectorXd s(bands);
    double acc = 0.0;
    for (Index b = 0; b < bands; ++b) s(b) = (acc += filtered(b));
    const double mn = s.minCoeff(), mx = s.maxCoeff();
    if (mx > mn) s = (s.array() - mn) / (mx - mn);
    else s.setConstant(0.5);
    return s;
}

void validate(const SceneSpec& spec) {
    if (spec.lines < 1 || spec.samples < 1) throw Error(ErrorCode::SpecOutOfBounds, "scene needs positive dimensions");
    if (spec.bands < 10) throw Error(ErrorCode::SpecOutOfBounds, "scene needs at least 10 bands");
    if (spec.background_endmembers < 1) throw Error(ErrorCode::SpecOutOfBounds, "need at least one endmember");
    if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma))
        throw Error(ErrorCode::SpecOutOfBounds, "noise_sigma must be finite and >= 0");
    if (!(spec.max_wavelength_um > spec.min_wavelength_um))
        throw Error(ErrorCode::SpecOutOfBounds, "wavelength range must be increasing");

    std::map<std::string, bool> kinds; // name -> is target
    std::vector<bool> occupied(static_cast<size_t>(spec.lines * spec.samples), false);
    auto check = [&](const PlantSpec& p, bool target) {
        if (p.library_name.empty()) throw Error(ErrorCode::SpecOutOfBounds, "planted object without a library name");
        if (p.library_name == "background") throw Error(ErrorCode::SpecOutOfBounds, "'background' is a reserved name");
        if (auto [it, inserted] = kinds.emplace(p.library_name, target); !inserted && it->second != target)
            throw Error(ErrorCode::SpecOutOfBounds, "'" + p.library_name + "' used as both target and confuser");
        if (target && !p.resembles.empty() && p.resembles != "background")
            throw Error(ErrorCode::SpecOutOfBounds, "a target may only resemble 'background'");
        if (!(p.similarity >= 0.0 && p.similarity <= 1.0))
            throw Error(ErrorCode::SpecOutOfBounds, "similarity of '" + p.library_name + "' outside [0, 1]");
        if (!(p.abundance > 0.0 && p.abundance <= 1.0))
            throw Error(ErrorCode::SpecOutOfBounds, "abundance of '" + p.library_name + "' outside (0, 1]");
        if (p.width < 1 || p.height < 1) throw Error(ErrorCode::SpecOutOfBounds, "object size must be positive");
        const PixelCoord lo = p.min_corner(), hi = p.max_corner();
        if (lo.line < 0 || lo.sample < 0 || hi.line >= spec.lines || hi.sample >= spec.samples)
            throw Error(ErrorCode::SpecOutOfBounds,
                        fmt::format("'{}' at ({}, {}) extends outside the image", p.library_name, p.center.line,
                                    p.center.sample));
        for (Index l = lo.line; l <= hi.line; ++l)
            for (Index s = lo.sample; s <= hi.sample; ++s) {
                auto&& cell = occupied[static_cast<size_t>(l * spec.samples + s)];
                if (cell) throw Error(ErrorCode::SpecOutOfBounds, "planted objects overlap at (" + std::to_string(l) + ", " + std::to_string(s) + ")");
                cell = true;
            }
    };
    for (const auto& t : spec.targets) check(t, true);
    for (const auto& name : spec.library_only_targets) {
        if (name.empty() || name == "background")
            throw Error(ErrorCode::SpecOutOfBounds, "invalid library-only target name '" + name + "'");
        if (auto [it, inserted] = kinds.emplace(name, true); !inserted && !it->second)
            throw Error(ErrorCode::SpecOutOfBounds, "'" + name + "' used as both target and confuser");
    }
    if (spec.targets.empty() && spec.confusers.empty() && spec.library_only_targets.empty())
        throw Error(ErrorCode::SpecOutOfBounds, "scene needs at least one library material");
    for (const auto& c : spec.confusers) {
        check(c, false);
        if (!c.resembles.empty()) {
            const auto it = kinds.find(c.resembles);
            if (it == kinds.end() || !it->second)
                throw Error(ErrorCode::SpecOutOfBounds, "confuser resembles unknown target '" + c.resembles + "'");
        }
    }
}

PlantSpec plant_from_json(const nlohmann::json& j) {
    PlantSpec p;
    p.library_name = j.at("library_name").get<std::string>();
    const auto& c = j.at("center");
    p.center = {c.at(0).get<Index>(), c.at(1).get<Index>()};
    p.width = j.value("width", 1);
    p.height = j.value("height", 1);
    p.abundance = j.value("abundance", 1.0);
    p.resembles = j.value("resembles", std::string{});
    p.similarity = j.value("similarity", 0.7);
    return p;
}

nlohmann::json plant_to_json(const PlantSpec& p, bool confuser) {
    nlohmann::json j = {{"library_name", p.library_name},
                        {"center", {p.center.line, p.center.sample}},
                        {"width", p.width},
                        {"height", p.height},
                        {"abundance", p.abundance}};
    if (confuser || !p.resembles.empty()) {
        j["resembles"] = p.resembles;
        j["similarity"] = p.similarity;
    }
    return j;
}

} // namespace

Scene generate_scene(const SceneSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);
    const Index bands = spec.bands;
    const Index npix = spec.lines * spec.samples;

    std::vector<double> wavelengths(static_cast<size_t>(bands));
    for (Index b = 0; b < bands; ++b)
        wavelengths[static_cast<size_t>(b)] =
            spec.min_wavelength_um + (spec.max_wavelength_um - spec.min_wavelength_um) * static_cast<double>(b) /
                                         static_cast<double>(bands - 1);

    std::vector<Eigen::VectorXd> endmembers;
    for (int e = 0; e < spec.background_endmembers; ++e) endmembers.push_back(smooth_spectrum(rng, bands));

    // Library: targets first, then confusers, each in order of first appearance.
    std::vector<LibraryEntry> entries;
    std::map<std::string, size_t> index_of;
    for (const auto& t : spec.targets)
        if (index_of.emplace(t.library_name, entries.size()).second) {
            Eigen::VectorXd s = smooth_spectrum(rng, bands);
            if (t.resembles == kBackgroundLabel) {
                // camouflaged material: mostly a background mixture
                Eigen::VectorXd mix = Eigen::VectorXd::Zero(bands);
                std::vector<double> w(endmembers.size());
                double total = 0.0;
                for (auto& x : w) total += (x = rng.exponential());
                for (size_t e = 0; e < w.size(); ++e) mix += (w[e] / total) * endmembers[e];
                s = t.similarity * mix + (1.0 - t.similarity) * s;
            }
            entries.push_back({t.library_name, MaterialKind::Target, std::move(s)});
        }
    for (const auto& name : spec.library_only_targets)
        if (index_of.emplace(name, entries.size()).second)
            entries.push_back({name, MaterialKind::Target, smooth_spectrum(rng, bands)});
    for (const auto& c : spec.confusers)
        if (index_of.emplace(c.library_name, entries.size()).second) {
            Eigen::VectorXd s = smooth_spectrum(rng, bands);
            if (!c.resembles.empty())
                s = c.similarity * entries[index_of.at(c.resembles)].spectrum + (1.0 - c.similarity) * s;
            entries.push_back({c.library_name, MaterialKind::Confuser, std::move(s)});
        }

    PixelMatrix<double> mix(npix, bands);
    PixelMatrix<double> noise(npix, bands);
    std::vector<double> weights(static_cast<size_t>(spec.background_endmembers));
    for (Index p = 0; p < npix; ++p) {
        double total = 0.0;
        for (auto& w : weights) total += (w = rng.exponential());
        Eigen::RowVectorXd m = Eigen::RowVectorXd::Zero(bands);
        for (size_t e = 0; e < weights.size(); ++e) m += (weights[e] / total) * endmembers[e].transpose();
        mix.row(p) = m;
        for (Index b = 0; b < bands; ++b) noise(p, b) = spec.noise_sigma * rng.normal();
    }

    PixelMatrix<double> data = mix;
    GroundTruth truth;
    auto plant = [&](const PlantSpec& ps, MaterialKind kind) {
        const Eigen::RowVectorXd lib = entries[index_of.at(ps.library_name)].spectrum.transpose();
        GroundTruthEntry g;
        g.label = ps.library_name;
        g.kind = kind;
        g.center = ps.center;
        g.min_corner = ps.min_corner();
        g.max_corner = ps.max_corner();
        g.abundance = ps.abundance;
        for (Index l = g.min_corner.line; l <= g.max_corner.line; ++l)
            for (Index s = g.min_corner.sample; s <= g.max_corner.sample; ++s) {
                const Index p = l * spec.samples + s;
                data.row(p) = ps.abundance * lib + (1.0 - ps.abundance) * mix.row(p);
                g.members.push_back({l, s});
            }
        truth.entries.push_back(std::move(g));
    };
    for (const auto& t : spec.targets) plant(t, MaterialKind::Target);
    for (const auto& c : spec.confusers) plant(c, MaterialKind::Confuser);
    data += noise;

    return Scene{HyperCube(spec.lines, spec.samples, std::move(data), wavelengths),
                 SpectralLibrary(wavelengths, std::move(entries)), std::move(truth)};
}

SceneSpec standard_scene_spec() {
    SceneSpec spec;
    spec.lines = 128;
    spec.samples = 128;
    spec.bands = 50;
    spec.background_endmembers = 3;
    spec.noise_sigma = 0.01;
    spec.seed = 20240818;

    // 5 rows of 6 targets; size shrinks from 5x5 down to 1x1 row by row.
    // T4 is camouflaged: 90% background mixture, so its distinguishing
    // residual lives in low-variance components.
    const Index row_lines[] = {12, 34, 56, 78, 100};
    const Index col_samples[] = {12, 32, 52, 72, 92, 112};
    const char* materials[] = {"T1", "T2", "T3", "T4", "T1", "T2"};
    const int sizes[] = {5, 4, 3, 2, 1};
    const double abundance[5][6] = {
        {1.0, 1.0, 1.0, 1.0, 1.0, 1.0},
        {1.0, 1.0, 1.0, 1.0, 0.9, 0.9},
        {1.0, 1.0, 0.9, 0.9, 0.8, 0.8},
        {0.9, 0.9, 0.8, 0.8, 0.7, 0.7},
        {0.9, 0.8, 0.6, 0.5, 0.5, 0.4},
    };
    for (int r = 0; r < 5; ++r)
        for (int c = 0; c < 6; ++c) {
            PlantSpec p;
            p.library_name = materials[c];
            p.center = {row_lines[r], col_samples[c]};
            p.width = p.height = sizes[r];
            p.abundance = abundance[r][c];
            if (p.library_name == std::string("T4")) {
                p.resembles = kBackgroundLabel;
                p.similarity = 0.9;
            }
            spec.targets.push_back(p);
        }

    // 10 confuser patches along the bottom edge.
    const char* confusers[] = {"C1", "C2", "C3"};
    const char* resembles[] = {"T1", "T2", "T3"};
    for (int i = 0; i < 10; ++i) {
        PlantSpec p;
        p.library_name = confusers[i % 3];
        p.resembles = resembles[i % 3];
        p.similarity = 0.7;
        p.center = {120, 8 + 12 * i};
        p.width = p.height = 3;
        p.abundance = 1.0;
        spec.confusers.push_back(p);
    }
    return spec;
}

SceneSpec scene_spec_from_json(const nlohmann::json& j) {
    try {
        SceneSpec spec;
        spec.lines = j.at("lines").get<Index>();
        spec.samples = j.at("samples").get<Index>();
        spec.bands = j.at("bands").get<Index>();
        spec.background_endmembers = j.value("background_endmembers", 3);
        spec.noise_sigma = j.value("noise_sigma", 0.01);
        spec.seed = j.value("seed", std::uint64_t{0});
        spec.min_wavelength_um = j.value("min_wavelength_um", 0.4);
        spec.max_wavelength_um = j.value("max_wavelength_um", 2.5);
        if (j.contains("targets"))
            for (const auto& t : j.at("targets")) spec.targets.push_back(plant_from_json(t));
        if (j.contains("confusers"))
            for (const auto& c : j.at("confusers")) spec.confusers.push_back(plant_from_json(c));
        if (j.contains("library_only_targets"))
            spec.library_only_targets = j.at("library_only_targets").get<std::vector<std::string>>();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("scene spec: ") + e.what());
    }
}

nlohmann::json to_json(const SceneSpec& spec) {
    nlohmann::json j = {{"lines", spec.lines},
                        {"samples", spec.samples},
                        {"bands", spec.bands},
                        {"background_endmembers", spec.background_endmembers},
                        {"noise_sigma", spec.noise_sigma},
                        {"seed", spec.seed},
                        {"min_wavelength_um", spec.min_wavelength_um},
                        {"max_wavelength_um", spec.max_wavelength_um},
                        {"targets", nlohmann::json::array()},
                        {"confusers", nlohmann::json::array()}};
    for (const auto& t : spec.targets) j["targets"].push_back(plant_to_json(t, false));
    for (const auto& c : spec.confusers) j["confusers"].push_back(plant_to_json(c, true));
    if (!spec.library_only_targets.empty()) j["library_only_targets"] = spec.library_only_targets;
    return j;
}

SceneSpec load_scene_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open scene spec " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, path.string() + ": " + e.what());
    }
    return scene_spec_from_json(j);
}

void write_truth_csv(const GroundTruth& truth, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << "label,kind,center_line,center_sample,min_line,min_sample,max_line,max_sample\n";
    for (const auto& e : truth.entries)
        out << fmt::format("{},{},{},{},{},{},{},{}\n", e.label, e.kind == MaterialKind::Target ? "target" : "confuser",
                           e.center.line, e.center.sample, e.min_corner.line, e.min_corner.sample, e.max_corner.line,
                           e.max_corner.sample);
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

GroundTruth load_truth_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    GroundTruth truth;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        std::istringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 8) throw Error(ErrorCode::RaggedRows, fmt::format("{}: row {} needs 8 cells", path.string(), row));
        GroundTruthEntry e;
        e.label = cells[0];
        if (cells[1] == "target") e.kind = MaterialKind::Target;
        else if (cells[1] == "confuser") e.kind = MaterialKind::Confuser;
        else throw Error(ErrorCode::InvalidArgument, fmt::format("{}: row {} has unknown kind", path.string(), row));
        try {
            e.center = {std::stoll(cells[2]), std::stoll(cells[3])};
            e.min_corner = {std::stoll(cells[4]), std::stoll(cells[5])};
            e.max_corner = {std::stoll(cells[6]), std::stoll(cells[7])};
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, fmt::format("{}: row {} has a non-integer coordinate", path.string(), row));
        }
        for (Index l = e.min_corner.line; l <= e.max_corner.line; ++l)
            for (Index s = e.min_corner.sample; s <= e.max_corner.sample; ++s) e.members.push_back({l, s});
        truth.entries.push_back(std::move(e));
    }
    return truth;
}

void write_scene(const Scene& scene, const std::filesystem::path& dir, const std::string& stem) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + dir.string() + ": " + ec.message());
    write_cube(scene.cube, dir / (stem + ".hdr"), WriteOptions{Interleave::Bip, DataType::Float64, ByteOrder::Little});
    write_spectral_library(scene.library, dir / "library.csv");
    write_truth_csv(scene.truth, dir / "truth.csv");
}

} // namespace hsd
