#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "hsd/cube.hpp"
#include "hsd/detect.hpp"
#include "hsd/identify.hpp"
#include "hsd/library.hpp"
#include "hsd/pca.hpp"
#include "hsd/synth.hpp"

namespace hsd {

struct SweepGrid {
    std::vector<Index> ks;

    /// 5, 10, ..., floor(bands / 5) * 5; a single full-rank point below 5 bands.
    static SweepGrid default_for(Index bands);
    /// Parses `start:stop:step` (inclusive stop) or a comma list `5,10,20`.
    static SweepGrid parse(const std::string& text);
};

enum class MatchMetric { Chebyshev, Euclidean };

/// True when `b` lies within `radius` pixels of `a` under `metric`.
bool within_radius(PixelCoord a, PixelCoord b, int radius, MatchMetric metric);

struct SweepConfig {
    RoiOptions roi;
    IdentifyOptions identify;
    AceForm form = AceForm::Unsquared;
    int radius = 3;
    MatchMetric metric = MatchMetric::Chebyshev;
    /// Fill wall_ms; off by default so reports stay byte-reproducible.
    bool record_timing = false;
    /// Recompute the decomposition at every grid point (verification only).
    bool recompute_per_k = false;
    unsigned threads = 0;
};

/// Detection + identification for one target at one rank.
struct TargetRun {
    std::string target;
    std::vector<RoiRecord> rois;
    std::vector<IdentificationResult> ids; // parallel to rois
};

struct RankRun {
    Index k = 0;
    bool failed = false;
    std::string failure;
    std::vector<TargetRun> targets;
};

struct SweepPoint {
    Index k = 0;
    double target_ace_mean = 0.0;
    double target_ace_std = 0.0;
    double nontarget_ace_mean = 0.0;
    double nontarget_ace_std = 0.0;
    int roi_count = 0;
    int confirmed_target_count = 0;
    int false_detection_count = 0;
    double wall_ms = 0.0;
    bool failed = false;
    std::string failure;
    // filled only when ground truth was supplied
    std::optional<double> truth_detection_rate;
    std::optional<double> truth_confirmed_rate;
};

struct SweepReport {
    std::vector<SweepPoint> per_k;
    Index reference_k = 0;
};

struct SweepResult {
    SweepReport report;
    std::vector<RankRun> runs; // one per grid point, grid order
};

/// Runs detection and identification for every target at every grid rank,
/// reusing one eigendecomposition. Envelope statistics split ROI peak scores
/// by the identification decision. A grid point that throws is recorded as
/// failed rather than dropped.
SweepResult run_sweep(const HyperCube& cube, const SpectralLibrary& library, const std::vector<std::string>& target_names,
                      const SweepGrid& grid, const SweepConfig& config = {}, const GroundTruth* truth = nullptr);

/// For every target-kind truth entry, whether an ROI of the same label's map
/// at this rank lies within `radius` of its center.
std::vector<bool> truth_matches(const RankRun& run, const GroundTruth& truth, int radius,
                                MatchMetric metric = MatchMetric::Chebyshev);

struct TrackHit {
    Index k = 0;
    bool matched = false;
    PixelCoord roi_center;
    double peak_score = 0.0;
    double probability = 0.0;
    double spectral_fit = 0.0;
    std::string best_label;
};

struct ObjectTrack {
    int object_id = 0;
    std::string target;
    PixelCoord reference_center;
    std::vector<TrackHit> per_k_hits;
};

/// Objects are the confirmed-target ROIs of the highest successful rank. At
/// each rank the hit is the highest-peak ROI of the same target map whose
/// center lies within `radius` of the object center.
std::vector<ObjectTrack> track_objects(const std::vector<RankRun>& runs, int radius = 3,
                                       MatchMetric metric = MatchMetric::Chebyshev);

enum class ReportFormat { Csv, Json, Svg };

/// Writes envelope.csv, tracks.csv, identifications.csv (csv), sweep.json
/// (json), envelope.svg and tracks.svg (svg) into `out_dir`.
void emit_report(const SweepResult& result, const std::vector<ObjectTrack>& tracks, const std::filesystem::path& out_dir,
                 const std::set<ReportFormat>& formats = {ReportFormat::Csv, ReportFormat::Json, ReportFormat::Svg});

std::string envelope_csv(const SweepReport& report);
std::string tracks_csv(const std::vector<ObjectTrack>& tracks);
std::string identifications_csv(const std::vector<RankRun>& runs);
std::string sweep_json(const SweepResult& result, const std::vector<ObjectTrack>& tracks);
std::string envelope_svg(const SweepReport& report);
std::string tracks_svg(const std::vector<ObjectTrack>& tracks);

} // namespace hsd
