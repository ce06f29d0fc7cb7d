#include "hsd/library.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace hsd {
namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

SpectralLibrary::SpectralLibrary(std::vector<double> wavelengths, std::vector<LibraryEntry> entries)
    : wavelengths_(std::move(wavelengths)), entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(ErrorCode::EmptyLibrary, "library has no spectra");
    std::set<std::string> names;
    for (const auto& e : entries_) {
        if (!names.insert(e.name).second) throw Error(ErrorCode::DuplicateName, "duplicate library entry '" + e.name + "'");
        if (e.spectrum.size() != static_cast<Index>(wavelengths_.size()))
            throw Error(ErrorCode::LengthMismatch,
                        fmt::format("entry '{}' has {} values for {} wavelengths", e.name, e.spectrum.size(),
                                    wavelengths_.size()));
        if (!e.spectrum.allFinite()) throw Error(ErrorCode::NonFiniteValue, "entry '" + e.name + "' has non-finite values");
    }
    for (double w : wavelengths_)
        if (!std::isfinite(w)) throw Error(ErrorCode::NonFiniteValue, "non-finite wavelength");
}

const LibraryEntry* SpectralLibrary::find(const std::string& name) const {
    for (const auto& e : entries_)
        if (e.name == name) return &e;
    return nullptr;
}

const LibraryEntry& SpectralLibrary::at(const std::string& name) const {
    if (const auto* e = find(name)) return *e;
    throw Error(ErrorCode::InvalidArgument, "no library entry named '" + name + "'");
}

SpectralLibrary load_spectral_library(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open library " + path.string());
    const std::string origin = path.string();

    std::string line;
    std::vector<std::string> names, kinds;
    while (names.empty() && std::getline(in, line))
        if (!trim(line).empty()) names = split_csv(line);
    // skip a UTF-8 byte-order mark
    if (!names.empty() && names[0].rfind("\xEF\xBB\xBF", 0) == 0) names[0] = names[0].substr(3);
    if (names.size() < 2) throw Error(ErrorCode::EmptyLibrary, origin + ": no spectrum columns");
    if (names[0] != "wavelength_um")
        throw Error(ErrorCode::InvalidArgument, origin + ": first column must be 'wavelength_um'");
    while (kinds.empty() && std::getline(in, line))
        if (!trim(line).empty()) kinds = split_csv(line);
    if (kinds.size() != names.size())
        throw Error(ErrorCode::RaggedRows, origin + ": kind row has " + std::to_string(kinds.size()) +
                                               " cells, header has " + std::to_string(names.size()));

    const std::size_t ncols = names.size() - 1;
    std::vector<LibraryEntry> entries(ncols);
    std::set<std::string> seen;
    for (std::size_t c = 0; c < ncols; ++c) {
        entries[c].name = names[c + 1];
        if (entries[c].name.empty()) throw Error(ErrorCode::InvalidArgument, origin + ": empty column name");
        if (!seen.insert(entries[c].name).second)
            throw Error(ErrorCode::DuplicateName, origin + ": duplicate column '" + entries[c].name + "'");
        const std::string& k = kinds[c + 1];
        if (k == "target") entries[c].kind = MaterialKind::Target;
        else if (k == "confuser") entries[c].kind = MaterialKind::Confuser;
        else throw Error(ErrorCode::InvalidArgument, origin + ": unknown kind '" + k + "' for '" + entries[c].name + "'");
    }

    std::vector<double> wavelengths;
    std::vector<std::vector<double>> columns(ncols);
    std::size_t row = 2;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto cells = split_csv(line);
        if (cells.size() != names.size())
            throw Error(ErrorCode::RaggedRows,
                        fmt::format("{}: row {} has {} cells, expected {}", origin, row, cells.size(), names.size()));
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v = 0.0;
            std::size_t used = 0;
            try {
                v = std::stod(cells[c], &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != cells[c].size() || cells[c].empty())
                throw Error(ErrorCode::NonFiniteValue,
                            fmt::format("{}: row {} column {} is not a number: '{}'", origin, row, c, cells[c]));
            if (!std::isfinite(v))
                throw Error(ErrorCode::NonFiniteValue, fmt::format("{}: row {} column {} is non-finite", origin, row, c));
            if (c == 0) wavelengths.push_back(v);
            else columns[c - 1].push_back(v);
        }
    }
    if (wavelengths.empty()) throw Error(ErrorCode::EmptyLibrary, origin + ": no data rows");
    for (std::size_t c = 0; c < ncols; ++c)
        entries[c].spectrum = Eigen::Map<const Eigen::VectorXd>(columns[c].data(), static_cast<Index>(columns[c].size()));
    return SpectralLibrary(std::move(wavelengths), std::move(entries));
}

void write_spectral_library(const SpectralLibrary& library, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write library " + path.string());
    out << "wavelength_um";
    for (const auto& e : library.entries()) out << ',' << e.name;
    out << "\nkind";
    for (const auto& e : library.entries()) out << ',' << (e.kind == MaterialKind::Target ? "target" : "confuser");
    out << '\n';
    for (Index b = 0; b < library.bands(); ++b) {
        out << fmt::format("{:.17g}", library.wavelengths()[static_cast<std::size_t>(b)]);
        for (const auto& e : library.entries()) out << ',' << fmt::format("{:.17g}", e.spectrum(b));
        out << '\n';
    }
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing library " + path.string());
}

void check_grid(const SpectralLibrary& library, const HyperCube& cube, double tolerance_um) {
    if (library.bands() != cube.bands())
        throw Error(ErrorCode::GridMismatch,
                    fmt::format("library has {} bands, cube has {}; resampling is not supported", library.bands(),
                                cube.bands()));
    if (cube.wavelengths_defaulted()) return;
    for (Index b = 0; b < cube.bands(); ++b) {
        const double lw = library.wavelengths()[static_cast<std::size_t>(b)];
        const double cw = cube.wavelengths()[static_cast<std::size_t>(b)];
        if (std::abs(lw - cw) > tolerance_um)
            throw Error(ErrorCode::GridMismatch, fmt::format("band {}: library {} um vs cube {} um", b, lw, cw));
    }
}

std::string material_stem(const std::string& name) {
    const auto pos = name.find_first_of("-_:");
    return pos == std::string::npos || pos == 0 ? name : name.substr(0, pos);
}

} // namespace hsd
