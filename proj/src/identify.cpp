#include "hsd/identify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

namespace hsd {

BackgroundSample estimate_background(const AceScoreMap& map, const HyperCube& cube, const RoiRecord& roi,
                                     const BackgroundOptions& options) {
    if (options.inner < 1 || options.outer <= options.inner)
        throw Error(ErrorCode::InvalidArgument, "background ring needs outer > inner >= 1");
    if (map.lines != cube.lines() || map.samples != cube.samples())
        throw Error(ErrorCode::SizeMismatch, "score map and cube dimensions differ");

    std::vector<bool> member(static_cast<size_t>(cube.pixel_count()), false);
    for (const auto& p : roi.members) member[static_cast<size_t>(cube.pixel_index(p))] = true;

    BackgroundSample bg;
    bg.inner = options.inner;
    bg.outer = options.outer;
    bg.max_ace = options.max_ace;
    const Index cl = roi.center.line, cs = roi.center.sample;
    for (Index l = std::max<Index>(0, cl - options.outer); l <= std::min(cube.lines() - 1, cl + options.outer); ++l)
        for (Index s = std::max<Index>(0, cs - options.outer); s <= std::min(cube.samples() - 1, cs + options.outer);
             ++s) {
            const Index d = std::max(std::abs(l - cl), std::abs(s - cs));
            if (d <= options.inner) continue;
            if (member[static_cast<size_t>(cube.pixel_index(l, s))]) continue;
            if (!(map(l, s) < options.max_ace)) continue;
            bg.pixels.push_back({l, s});
        }
    if (bg.size() < options.min_samples)
        throw Error(ErrorCode::InsufficientBackground,
                    fmt::format("{} background pixels around ({}, {}), need {}", bg.size(), cl, cs, options.min_samples));

    bg.spectra.resize(bg.size(), cube.bands());
    for (Index i = 0; i < bg.size(); ++i) bg.spectra.row(i) = cube.spectrum(bg.pixels[static_cast<size_t>(i)]);
    return bg;
}

double spectral_fit(const Eigen::Ref<const Eigen::VectorXd>& roi_spectrum, const Eigen::Ref<const Eigen::VectorXd>& reference) {
    if (roi_spectrum.size() != reference.size())
        throw Error(ErrorCode::LengthMismatch, "spectral fit needs equal-length spectra");
    const Eigen::VectorXd a = roi_spectrum.array() - roi_spectrum.mean();
    const Eigen::VectorXd b = reference.array() - reference.mean();
    const double na = a.norm(), nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ConstantSpectrum, "spectral fit of a constant spectrum");
    const double c = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
    return std::clamp(0.5 * (c + 1.0), 0.0, 1.0);
}

ProbabilityTable class_probability(const Eigen::Ref<const Eigen::VectorXd>& roi_spectrum, const SpectralLibrary& library,
                                   const BackgroundSample& background, const WhiteningModel<double>& model) {
    if (background.size() == 0)
        throw Error(ErrorCode::InsufficientBackground, "empty background sample");
    if (library.bands() != model.bands())
        throw Error(ErrorCode::GridMismatch, "library and whitening model band counts differ");
    if (library.find(kBackgroundLabel))
        throw Error(ErrorCode::InvalidArgument, "library entry name 'background' is reserved");

    const Eigen::VectorXd x = whiten(model, roi_spectrum);
    ProbabilityTable table;
    table.reserve(library.entries().size() + 1);
    for (const auto& e : library.entries())
        table.push_back({e.name, (x - whiten(model, e.spectrum)).squaredNorm(), 0.0});
    table.push_back({kBackgroundLabel, (x - whiten(model, background.mean())).squaredNorm(), 0.0});

    double d_min = table.front().distance;
    for (const auto& c : table) d_min = std::min(d_min, c.distance);
    std::vector<double> weights;
    weights.reserve(table.size());
    for (auto& c : table) {
        c.probability = std::exp(-0.5 * (c.distance - d_min));
        weights.push_back(c.probability);
    }
    std::sort(weights.begin(), weights.end());
    double z = 0.0;
    for (double w : weights) z += w;
    for (auto& c : table) c.probability /= z;
    return table;
}

const ClassScore& best_class(const ProbabilityTable& table) {
    if (table.empty()) throw Error(ErrorCode::InvalidArgument, "empty probability table");
    const ClassScore* best = &table.front();
    for (const auto& c : table)
        if (c.probability > best->probability || (c.probability == best->probability && c.label < best->label))
            best = &c;
    return *best;
}

IdentificationResult identify(const RoiRecord& roi, const AceScoreMap& map, const HyperCube& cube,
                              const SpectralLibrary& library, const WhiteningModel<double>& model,
                              const IdentifyOptions& options) {
    IdentificationResult r;
    r.roi_id = roi.id;
    r.center = roi.center;
    r.peak_score = roi.peak_score;
    r.decision = Decision::NonTarget;

    BackgroundSample bg;
    try {
        bg = estimate_background(map, cube, roi, options.background);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientBackground) throw;
        r.flag = "insufficient_background";
        return r;
    }

    r.per_class = class_probability(roi.mean_spectrum, library, bg, model);
    const ClassScore& best = best_class(r.per_class);
    r.best_label = best.label;
    r.best_stem = material_stem(best.label);
    r.probability = best.probability;

    const LibraryEntry* entry = library.find(best.label);
    const Eigen::VectorXd reference = entry ? entry->spectrum : bg.mean();
    try {
        r.spectral_fit = spectral_fit(roi.mean_spectrum, reference);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::ConstantSpectrum) throw;
        r.flag = "constant_spectrum";
        r.spectral_fit = 0.0;
    }

    const bool is_target = entry && entry->kind == MaterialKind::Target;
    if (is_target && r.probability >= options.p_min && r.spectral_fit >= options.f_min) r.decision = Decision::Target;
    return r;
}

void write_identification_csv(const std::vector<IdentificationResult>& results, std::ostream& out) {
    out << "roi_id,line,sample,peak_score,best_label,probability,spectral_fit,decision,flag\n";
    for (const auto& r : results)
        out << fmt::format("{},{},{},{:.12g},{},{:.12g},{:.12g},{},{}\n", r.roi_id, r.center.line, r.center.sample,
                           r.peak_score, r.best_label, r.probability, r.spectral_fit,
                           r.decision == Decision::Target ? "target" : "non-target", r.flag);
}

void write_identification_csv(const std::vector<IdentificationResult>& results, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    write_identification_csv(results, out);
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

} // namespace hsd
