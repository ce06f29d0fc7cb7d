#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "hsd/error.hpp"

namespace hsd {

using Index = Eigen::Index;

/// Row-major pixel × band matrix. Row `line * samples + sample` is the
/// spectrum of one pixel, so the in-memory layout is band-interleaved-by-pixel.
template <typename Scalar>
using PixelMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct PixelCoord {
    Index line = 0;
    Index sample = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
    friend auto operator<=>(const PixelCoord&, const PixelCoord&) = default;
};

/// A lines × samples × bands reflectance raster held in canonical BIP order.
class HyperCube {
public:
    HyperCube() = default;

    /// Takes ownership of `data` (rows = lines*samples, cols = bands) and
    /// validates every invariant. An empty `wavelengths` defaults to band
    /// indices; `defaulted` marks a supplied axis as synthesized.
    HyperCube(Index lines, Index samples, PixelMatrix<double> data,
              std::vector<double> wavelengths = {}, bool defaulted = false);

    Index lines() const noexcept { return lines_; }
    Index samples() const noexcept { return samples_; }
    Index bands() const noexcept { return data_.cols(); }
    Index pixel_count() const noexcept { return lines_ * samples_; }

    const std::vector<double>& wavelengths() const noexcept { return wavelengths_; }
    /// True when the wavelength axis was synthesized from band indices.
    bool wavelengths_defaulted() const noexcept { return wavelengths_defaulted_; }

    const PixelMatrix<double>& pixels() const noexcept { return data_; }

    Index pixel_index(Index line, Index sample) const noexcept { return line * samples_ + sample; }
    Index pixel_index(PixelCoord p) const noexcept { return pixel_index(p.line, p.sample); }

    auto spectrum(Index line, Index sample) const { return data_.row(pixel_index(line, sample)); }
    auto spectrum(PixelCoord p) const { return data_.row(pixel_index(p)); }

    bool contains(Index line, Index sample) const noexcept {
        return line >= 0 && line < lines_ && sample >= 0 && sample < samples_;
    }

    friend bool operator==(const HyperCube& a, const HyperCube& b);

private:
    Index lines_ = 0;
    Index samples_ = 0;
    PixelMatrix<double> data_;
    std::vector<double> wavelengths_;
    bool wavelengths_defaulted_ = false;
};

struct BandMask {
    std::vector<bool> keep;

    Index kept_count() const noexcept;
    /// Mask that keeps every band of an `bands`-band cube.
    static BandMask all(Index bands) { return BandMask{std::vector<bool>(static_cast<size_t>(bands), true)}; }
};

/// Drops the masked-out bands, preserving band order and filtering the
/// wavelength axis identically.
HyperCube apply_band_mask(const HyperCube& cube, const BandMask& mask);

/// Mask equivalent to applying `first` and then `second` (defined on the
/// bands that survive `first`).
BandMask compose_masks(const BandMask& first, const BandMask& second);

// ---------------------------------------------------------------------------
// ENVI-style header + raw binary payload

enum class Interleave { Bsq, Bil, Bip };
enum class ByteOrder { Little = 0, Big = 1 };
enum class DataType { Float32 = 4, Float64 = 5 };

struct RasterHeader {
    Index lines = 0;
    Index samples = 0;
    Index bands = 0;
    DataType data_type = DataType::Float32;
    Interleave interleave = Interleave::Bsq;
    ByteOrder byte_order = ByteOrder::Little;
    Index header_offset = 0;
    std::vector<double> wavelengths;
};

struct WriteOptions {
    Interleave interleave = Interleave::Bip;
    DataType data_type = DataType::Float64;
    ByteOrder byte_order = ByteOrder::Little;
};

/// Parses an ENVI header file. Throws MalformedHeader / UnsupportedDataType.
RasterHeader read_header(const std::filesystem::path& header_path);

/// Binary payload path for a header: `<name>.img` next to `<name>.hdr`.
std::filesystem::path payload_path(const std::filesystem::path& header_path);

HyperCube load_cube(const std::filesystem::path& header_path);

/// Writes `<name>.hdr` and `<name>.img`; `header_path` names the .hdr file.
void write_cube(const HyperCube& cube, const std::filesystem::path& header_path,
                const WriteOptions& options = {});

/// Low-level writer for rasters that need not satisfy HyperCube invariants
/// (single-band score maps). `values` is pixel-major (BIP).
void write_raster(const std::filesystem::path& header_path, Index lines, Index samples,
                  Index bands, const PixelMatrix<double>& values,
                  const std::vector<double>& wavelengths, const WriteOptions& options);

} // namespace hsd
