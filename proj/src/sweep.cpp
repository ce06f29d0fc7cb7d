#include "hsd/sweep.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <fmt/format.h>

namespace hsd {
namespace {

struct Moments {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std = std::numeric_limits<double>::quiet_NaN();
};

Moments moments(const std::vector<double>& v) {
    Moments m;
    if (v.empty()) return m;
    double sum = 0.0;
    for (double x : v) sum += x;
    m.mean = sum / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m.mean) * (x - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(v.size()));
    return m;
}

Index parse_index(const std::string& s, const std::string& text) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != s.size()) throw Error(ErrorCode::InvalidArgument, "bad grid specification '" + text + "'");
    return static_cast<Index>(v);
}

RankRun run_rank(const HyperCube& cube, const SpectralLibrary& library, const std::vector<std::string>& targets,
                 const WhiteningModel<double>& model, const SweepConfig& config) {
    RankRun run;
    run.k = model.rank();
    const WhitenedCube<double> wcube = whiten_cube(model, cube, config.threads);
    for (const auto& name : targets) {
        TargetRun tr;
        tr.target = name;
        const Eigen::VectorXd t_hat = whiten_target(model, library.at(name).spectrum);
        const AceScoreMap map = ace_map(wcube, t_hat, name, config.form, config.threads);
        tr.rois = extract_rois(map, cube, config.roi);
        tr.ids.reserve(tr.rois.size());
        for (const auto& roi : tr.rois) tr.ids.push_back(identify(roi, map, cube, library, model, config.identify));
        run.targets.push_back(std::move(tr));
    }
    return run;
}

} // namespace

SweepGrid SweepGrid::default_for(Index bands) {
    SweepGrid g;
    for (Index k = 5; k <= bands; k += 5) g.ks.push_back(k);
    if (g.ks.empty()) g.ks.push_back(bands);
    return g;
}

SweepGrid SweepGrid::parse(const std::string& text) {
    SweepGrid g;
    if (text.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::istringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ':')) parts.push_back(part);
        if (parts.size() != 3) throw Error(ErrorCode::InvalidArgument, "grid must be start:stop:step, got '" + text + "'");
        const Index start = parse_index(parts[0], text), stop = parse_index(parts[1], text),
                    step = parse_index(parts[2], text);
        if (start < 1 || step < 1 || stop < start)
            throw Error(ErrorCode::InvalidArgument, "grid needs 1 <= start <= stop and step >= 1");
        for (Index k = start; k <= stop; k += step) g.ks.push_back(k);
    } else {
        std::istringstream ss(text);
        std::string part;
        while (std::getline(ss, part, ',')) g.ks.push_back(parse_index(part, text));
    }
    if (g.ks.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
    return g;
}

bool within_radius(PixelCoord a, PixelCoord b, int radius, MatchMetric metric) {
    const Index dl = std::abs(a.line - b.line), ds = std::abs(a.sample - b.sample);
    if (metric == MatchMetric::Chebyshev) return std::max(dl, ds) <= radius;
    return dl * dl + ds * ds <= static_cast<Index>(radius) * radius;
}

SweepResult run_sweep(const HyperCube& cube, const SpectralLibrary& library, const std::vector<std::string>& target_names,
                      const SweepGrid& grid, const SweepConfig& config, const GroundTruth* truth) {
    if (target_names.empty()) throw Error(ErrorCode::InvalidArgument, "no targets requested");
    if (grid.ks.empty()) throw Error(ErrorCode::InvalidArgument, "empty grid");
    for (size_t i = 0; i < grid.ks.size(); ++i) {
        if (grid.ks[i] < 1) throw Error(ErrorCode::InvalidArgument, "grid ranks must be >= 1");
        if (i > 0 && grid.ks[i] <= grid.ks[i - 1])
            throw Error(ErrorCode::InvalidArgument, "grid ranks must be strictly increasing");
    }
    check_grid(library, cube);
    for (const auto& name : target_names) library.at(name);

    const SceneStats<double> stats = compute_stats(cube);
    const EigenModel<double> eigen = eigendecompose(stats);

    SweepResult result;
    for (const Index k : grid.ks) {
        const auto start = std::chrono::steady_clock::now();
        RankRun run;
        run.k = k;
        try {
            const WhiteningModel<double> model =
                config.recompute_per_k ? whitening_matrix(eigendecompose(compute_stats(cube)), stats.mean, k)
                                       : whitening_matrix(eigen, stats.mean, k);
            run = run_rank(cube, library, target_names, model, config);
        } catch (const Error& e) {
            run.failed = true;
            run.failure = e.what();
        }
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

        SweepPoint pt;
        pt.k = k;
        pt.failed = run.failed;
        pt.failure = run.failure;
        pt.wall_ms = config.record_timing ? ms : 0.0;
        std::vector<double> confirmed, rejected;
        for (const auto& tr : run.targets)
            for (size_t i = 0; i < tr.rois.size(); ++i)
                (tr.ids[i].decision == Decision::Target ? confirmed : rejected).push_back(tr.rois[i].peak_score);
        const Moments mt = moments(confirmed), mn = moments(rejected);
        pt.target_ace_mean = mt.mean;
        pt.target_ace_std = mt.std;
        pt.nontarget_ace_mean = mn.mean;
        pt.nontarget_ace_std = mn.std;
        pt.confirmed_target_count = static_cast<int>(confirmed.size());
        pt.false_detection_count = static_cast<int>(rejected.size());
        pt.roi_count = pt.confirmed_target_count + pt.false_detection_count;

        if (truth && !run.failed) {
            const auto hits = truth_matches(run, *truth, config.radius, config.metric);
            int n = 0, found = 0, confirmed_hits = 0;
            size_t h = 0;
            for (const auto& e : truth->entries) {
                if (e.kind != MaterialKind::Target) continue;
                ++n;
                if (hits[h++]) ++found;
                for (const auto& tr : run.targets) {
                    bool ok = false;
                    for (size_t i = 0; i < tr.rois.size() && !ok; ++i)
                        ok = tr.ids[i].decision == Decision::Target && tr.ids[i].best_label == e.label &&
                             within_radius(e.center, tr.rois[i].center, config.radius, config.metric);
                    if (ok) {
                        ++confirmed_hits;
                        break;
                    }
                }
            }
            if (n > 0) {
                pt.truth_detection_rate = static_cast<double>(found) / n;
                pt.truth_confirmed_rate = static_cast<double>(confirmed_hits) / n;
            }
        }

        if (!run.failed) result.report.reference_k = k;
        result.report.per_k.push_back(std::move(pt));
        result.runs.push_back(std::move(run));
    }
    return result;
}

std::vector<bool> truth_matches(const RankRun& run, const GroundTruth& truth, int radius, MatchMetric metric) {
    std::vector<bool> out;
    for (const auto& e : truth.entries) {
        if (e.kind != MaterialKind::Target) continue;
        bool hit = false;
        for (const auto& tr : run.targets) {
            if (tr.target != e.label) continue;
            for (const auto& roi : tr.rois)
                if (within_radius(e.center, roi.center, radius, metric)) hit = true;
        }
        out.push_back(hit);
    }
    return out;
}

std::vector<ObjectTrack> track_objects(const std::vector<RankRun>& runs, int radius, MatchMetric metric) {
    const RankRun* reference = nullptr;
    for (const auto& r : runs)
        if (!r.failed && (!reference || r.k > reference->k)) reference = &r;
    std::vector<ObjectTrack> tracks;
    if (!reference) return tracks;

    for (const auto& tr : reference->targets)
        for (size_t i = 0; i < tr.rois.size(); ++i) {
            if (tr.ids[i].decision != Decision::Target) continue;
            ObjectTrack t;
            t.object_id = static_cast<int>(tracks.size()) + 1;
            t.target = tr.target;
            t.reference_center = tr.rois[i].center;
            tracks.push_back(std::move(t));
        }

    for (auto& track : tracks)
        for (const auto& run : runs) {
            TrackHit hit;
            hit.k = run.k;
            for (const auto& tr : run.targets) {
                if (tr.target != track.target) continue;
                for (size_t i = 0; i < tr.rois.size(); ++i) {
                    const auto& roi = tr.rois[i];
                    if (!within_radius(track.reference_center, roi.center, radius, metric)) continue;
                    const bool better = !hit.matched || roi.peak_score > hit.peak_score ||
                                        (roi.peak_score == hit.peak_score && roi.center < hit.roi_center);
                    if (!better) continue;
                    hit.matched = true;
                    hit.roi_center = roi.center;
                    hit.peak_score = roi.peak_score;
                    hit.probability = tr.ids[i].probability;
                    hit.spectral_fit = tr.ids[i].spectral_fit;
                    hit.best_label = tr.ids[i].best_label;
                }
            }
            track.per_k_hits.push_back(std::move(hit));
        }
    return tracks;
}

} // namespace hsd
