#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "hsd/cube.hpp"
#include "hsd/detect.hpp"
#include "hsd/library.hpp"
#include "hsd/pca.hpp"

namespace hsd {

inline constexpr const char* kBackgroundLabel = "background";

struct BackgroundOptions {
    int inner = 5;   // ring excludes Chebyshev distance <= inner
    int outer = 15;  // ring includes Chebyshev distance <= outer
    double max_ace = 0.2;
    int min_samples = 25;
};

/// Low-ACE pixels on a square ring around an ROI center.
struct BackgroundSample {
    std::vector<PixelCoord> pixels;
    PixelMatrix<double> spectra; // one row per pixel
    int inner = 0;
    int outer = 0;
    double max_ace = 0.0;

    Index size() const noexcept { return static_cast<Index>(pixels.size()); }
    Eigen::VectorXd mean() const { return spectra.colwise().mean().transpose(); }
};

/// Collects ring pixels (clipped at the image border) whose score is below
/// `max_ace`, skipping ROI members. Throws InsufficientBackground when fewer
/// than `min_samples` remain.
BackgroundSample estimate_background(const AceScoreMap& map, const HyperCube& cube, const RoiRecord& roi,
                                     const BackgroundOptions& options = {});

/// Cosine of the two mean-removed spectra mapped from [-1, 1] onto [0, 1].
double spectral_fit(const Eigen::Ref<const Eigen::VectorXd>& roi_spectrum,
                    const Eigen::Ref<const Eigen::VectorXd>& reference);

struct ClassScore {
    std::string label;
    double distance = 0.0; // squared whitened distance
    double probability = 0.0;
};

/// Library entries in library order, then the background class.
using ProbabilityTable = std::vector<ClassScore>;

/// Gaussian-kernel class probabilities, p_i proportional to exp(-d_i / 2)
/// with d_i the squared whitened distance to class i. The normalizer is
/// summed in sorted order so entry order cannot change any value.
ProbabilityTable class_probability(const Eigen::Ref<const Eigen::VectorXd>& roi_spectrum, const SpectralLibrary& library,
                                   const BackgroundSample& background, const WhiteningModel<double>& model);

/// Highest-probability entry; ties go to the lexicographically smallest label.
const ClassScore& best_class(const ProbabilityTable& table);

enum class Decision { Target, NonTarget };

struct IdentifyOptions {
    double p_min = 0.5;
    double f_min = 0.5;
    BackgroundOptions background;
};

struct IdentificationResult {
    int roi_id = 0;
    PixelCoord center;
    double peak_score = 0.0;
    std::string best_label;
    std::string best_stem;
    double probability = 0.0;
    double spectral_fit = 0.0;
    Decision decision = Decision::NonTarget;
    std::string flag; // empty, "insufficient_background" or "constant_spectrum"
    ProbabilityTable per_class;
};

IdentificationResult identify(const RoiRecord& roi, const AceScoreMap& map, const HyperCube& cube,
                              const SpectralLibrary& library, const WhiteningModel<double>& model,
                              const IdentifyOptions& options = {});

/// CSV `roi_id,line,sample,peak_score,best_label,probability,spectral_fit,decision,flag`.
void write_identification_csv(const std::vector<IdentificationResult>& results, std::ostream& out);
void write_identification_csv(const std::vector<IdentificationResult>& results, const std::filesystem::path& path);

} // namespace hsd
