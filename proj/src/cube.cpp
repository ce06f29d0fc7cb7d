#include "hsd/cube.hpp"

#include <cmath>
#include <string>

namespace hsd {

HyperCube::HyperCube(Index lines, Index samples, PixelMatrix<double> data,
                     std::vector<double> wavelengths, bool defaulted)
    : lines_(lines), samples_(samples), data_(std::move(data)), wavelengths_(std::move(wavelengths)),
      wavelengths_defaulted_(defaulted) {
    if (lines_ < 1 || samples_ < 1)
        throw Error(ErrorCode::InvalidArgument, "cube needs at least one line and one sample");
    if (data_.cols() < 2)
        throw Error(ErrorCode::TooFewBands, "cube needs at least 2 bands, got " + std::to_string(data_.cols()));
    if (data_.rows() != lines_ * samples_)
        throw Error(ErrorCode::SizeMismatch, "pixel rows " + std::to_string(data_.rows()) +
                                                 " != lines*samples " + std::to_string(lines_ * samples_));
    if (wavelengths_.empty()) {
        wavelengths_.resize(static_cast<size_t>(data_.cols()));
        for (size_t b = 0; b < wavelengths_.size(); ++b) wavelengths_[b] = static_cast<double>(b);
        wavelengths_defaulted_ = true;
    }
    if (static_cast<Index>(wavelengths_.size()) != data_.cols())
        throw Error(ErrorCode::LengthMismatch, "wavelength count " + std::to_string(wavelengths_.size()) +
                                                   " != bands " + std::to_string(data_.cols()));
    for (size_t b = 1; b < wavelengths_.size(); ++b)
        if (!(wavelengths_[b] > wavelengths_[b - 1]))
            throw Error(ErrorCode::InvalidArgument, "wavelengths must be strictly increasing at band " +
                                                        std::to_string(b));
    for (Index p = 0; p < data_.rows(); ++p)
        for (Index b = 0; b < data_.cols(); ++b)
            if (!std::isfinite(data_(p, b)))
                throw Error(ErrorCode::NonFiniteData, "non-finite value at band " + std::to_string(b) +
                                                          ", pixel " + std::to_string(p));
}

bool operator==(const HyperCube& a, const HyperCube& b) {
    return a.lines_ == b.lines_ && a.samples_ == b.samples_ && a.wavelengths_ == b.wavelengths_ &&
           a.data_.rows() == b.data_.rows() && a.data_.cols() == b.data_.cols() && a.data_ == b.data_;
}

Index BandMask::kept_count() const noexcept {
    Index n = 0;
    for (bool k : keep) n += k ? 1 : 0;
    return n;
}

HyperCube apply_band_mask(const HyperCube& cube, const BandMask& mask) {
    if (static_cast<Index>(mask.keep.size()) != cube.bands())
        throw Error(ErrorCode::LengthMismatch, "mask length " + std::to_string(mask.keep.size()) +
                                                   " != cube bands " + std::to_string(cube.bands()));
    const Index kept = mask.kept_count();
    if (kept < 2) throw Error(ErrorCode::TooFewBands, "mask keeps " + std::to_string(kept) + " bands");

    PixelMatrix<double> out(cube.pixel_count(), kept);
    std::vector<double> wl;
    wl.reserve(static_cast<size_t>(kept));
    Index col = 0;
    for (Index b = 0; b < cube.bands(); ++b) {
        if (!mask.keep[static_cast<size_t>(b)]) continue;
        out.col(col++) = cube.pixels().col(b);
        wl.push_back(cube.wavelengths()[static_cast<size_t>(b)]);
    }
    return HyperCube(cube.lines(), cube.samples(), std::move(out), std::move(wl),
                     cube.wavelengths_defaulted());
}

BandMask compose_masks(const BandMask& first, const BandMask& second) {
    if (static_cast<Index>(second.keep.size()) != first.kept_count())
        throw Error(ErrorCode::LengthMismatch, "second mask must cover the bands kept by the first");
    BandMask out{std::vector<bool>(first.keep.size(), false)};
    size_t j = 0;
    for (size_t b = 0; b < first.keep.size(); ++b)
        if (first.keep[b]) out.keep[b] = second.keep[j++];
    return out;
}

} // namespace hsd
