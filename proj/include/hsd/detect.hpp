#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsd/cube.hpp"
#include "hsd/error.hpp"
#include "hsd/parallel.hpp"
#include "hsd/pca.hpp"

namespace hsd {

/// Unsquared ACE is the whitened-space cosine in [-1, 1]. The squared form
/// (cosine squared, in [0, 1]) is kept for comparison only.
enum class AceForm { Unsquared, Squared };

struct AceScoreMap {
    Index lines = 0;
    Index samples = 0;
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> scores;
    std::string target_name;
    Index rank = 0;
    AceForm form = AceForm::Unsquared;

    double operator()(Index line, Index sample) const { return scores(line, sample); }
    double operator()(PixelCoord p) const { return scores(p.line, p.sample); }
};

struct RoiRecord {
    int id = 0;
    PixelCoord center;
    double peak_score = 0.0;
    std::vector<PixelCoord> members; // raster order
    Eigen::VectorXd mean_spectrum;   // original band space

    Index pixel_count() const noexcept { return static_cast<Index>(members.size()); }
};

enum class RoiOrder {
    PeakScore, // descending peak score; ties by center line, then sample
    Raster,    // raster position of each component's first pixel
};

struct RoiOptions {
    double threshold = 0.5;
    int cap = 100;
    RoiOrder order = RoiOrder::PeakScore;
};

namespace detail {

template <typename X, typename T>
double whitened_cosine(const X& x, const T& t, double t_norm, AceForm form) {
    double dot = 0.0, xx = 0.0;
    for (Index i = 0; i < t.size(); ++i) {
        const double xi = static_cast<double>(x(i));
        dot += xi * static_cast<double>(t(i));
        xx += xi * xi;
    }
    if (xx == 0.0) return 0.0;
    double c = dot / (std::sqrt(xx) * t_norm);
    c = std::clamp(c, -1.0, 1.0);
    return form == AceForm::Squared ? c * c : c;
}

template <typename T>
double target_norm(const T& t) {
    double tt = 0.0;
    for (Index i = 0; i < t.size(); ++i) tt += static_cast<double>(t(i)) * static_cast<double>(t(i));
    const double n = std::sqrt(tt);
    if (!(n > 0.0) || !std::isfinite(n))
        throw Error(ErrorCode::ZeroTarget, "whitened target has zero norm (target equals the scene mean in the retained subspace)");
    return n;
}

} // namespace detail

/// ACE between a whitened pixel and a whitened target:
/// <x, t> / (|x| |t|). A zero pixel scores exactly 0.
template <typename DX, typename DT>
double ace_score(const Eigen::MatrixBase<DX>& x_hat, const Eigen::MatrixBase<DT>& t_hat,
                 AceForm form = AceForm::Unsquared) {
    if (x_hat.size() != t_hat.size() || t_hat.size() < 1)
        throw Error(ErrorCode::LengthMismatch, "pixel and target must have the same nonzero length");
    return detail::whitened_cosine(x_hat.derived(), t_hat.derived(), detail::target_norm(t_hat.derived()), form);
}

/// Whitened target t_hat = W_k^T (t - mu).
template <typename Scalar, typename Derived>
Vector<Scalar> whiten_target(const WhiteningModel<Scalar>& model, const Eigen::MatrixBase<Derived>& target) {
    return whiten(model, target);
}

/// Per-pixel ACE over a whitened cube. Rows are processed independently, so
/// the map is bitwise identical for any thread count.
template <typename Scalar, typename DT>
AceScoreMap ace_map(const WhitenedCube<Scalar>& wcube, const Eigen::MatrixBase<DT>& t_hat, std::string target_name = {},
                    AceForm form = AceForm::Unsquared, unsigned threads = 0) {
    if (t_hat.size() != wcube.rank())
        throw Error(ErrorCode::LengthMismatch, "target rank " + std::to_string(t_hat.size()) +
                                                   " != whitened cube rank " + std::to_string(wcube.rank()));
    const Vector<Scalar> t = t_hat;
    const double t_norm = detail::target_norm(t);

    AceScoreMap map;
    map.lines = wcube.lines;
    map.samples = wcube.samples;
    map.scores.resize(wcube.lines, wcube.samples);
    map.target_name = std::move(target_name);
    map.rank = wcube.rank();
    map.form = form;
    parallel_for(
        wcube.lines,
        [&](Index begin, Index end) {
            for (Index l = begin; l < end; ++l)
                for (Index s = 0; s < wcube.samples; ++s)
                    map.scores(l, s) = detail::whitened_cosine(wcube.pixel(l, s), t, t_norm, form);
        },
        threads);
    return map;
}

/// Groups pixels scoring >= threshold into 8-connected components, ranks
/// them, and keeps the first `cap`. Mean spectra come from `cube`.
std::vector<RoiRecord> extract_rois(const AceScoreMap& map, const HyperCube& cube, const RoiOptions& options = {});

/// CSV `id,line,sample,peak_score,pixel_count`.
void write_roi_csv(const std::vector<RoiRecord>& rois, std::ostream& out);
void write_roi_csv(const std::vector<RoiRecord>& rois, const std::filesystem::path& path);

/// Single-band float32 raster in the cube header format.
void write_score_map(const AceScoreMap& map, const std::filesystem::path& header_path);

} // namespace hsd
