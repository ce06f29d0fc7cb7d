#include "hsd/detect.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>

#include <fmt/format.h>

namespace hsd {

std::vector<RoiRecord> extract_rois(const AceScoreMap& map, const HyperCube& cube, const RoiOptions& options) {
    if (!(options.threshold > -1.0 && options.threshold <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "threshold must lie in (-1, 1]");
    if (options.cap < 1) throw Error(ErrorCode::InvalidArgument, "ROI cap must be at least 1");
    if (map.lines != cube.lines() || map.samples != cube.samples())
        throw Error(ErrorCode::SizeMismatch, "score map and cube dimensions differ");

    const Index lines = map.lines, samples = map.samples;
    std::vector<int> label(static_cast<size_t>(lines * samples), -1);
    struct Component {
        std::vector<PixelCoord> members;
        Index first_raster = 0;
    };
    std::vector<Component> components;
    std::vector<PixelCoord> stack;

    for (Index l = 0; l < lines; ++l)
        for (Index s = 0; s < samples; ++s) {
            const auto idx = static_cast<size_t>(l * samples + s);
            if (label[idx] >= 0 || !(map(l, s) >= options.threshold)) continue;
            const int id = static_cast<int>(components.size());
            Component comp;
            comp.first_raster = l * samples + s;
            label[idx] = id;
            stack.push_back({l, s});
            while (!stack.empty()) {
                const PixelCoord p = stack.back();
                stack.pop_back();
                comp.members.push_back(p);
                for (Index dl = -1; dl <= 1; ++dl)
                    for (Index ds = -1; ds <= 1; ++ds) {
                        const Index nl = p.line + dl, ns = p.sample + ds;
                        if ((dl == 0 && ds == 0) || nl < 0 || nl >= lines || ns < 0 || ns >= samples) continue;
                        const auto nidx = static_cast<size_t>(nl * samples + ns);
                        if (label[nidx] >= 0 || !(map(nl, ns) >= options.threshold)) continue;
                        label[nidx] = id;
                        stack.push_back({nl, ns});
                    }
            }
            std::sort(comp.members.begin(), comp.members.end());
            components.push_back(std::move(comp));
        }

    std::vector<RoiRecord> rois;
    std::vector<Index> first_raster;
    rois.reserve(components.size());
    for (auto& comp : components) {
        RoiRecord r;
        r.center = comp.members.front();
        r.peak_score = map(r.center);
        for (const auto& p : comp.members)
            if (map(p) > r.peak_score) {
                r.peak_score = map(p);
                r.center = p;
            }
        r.members = std::move(comp.members);
        rois.push_back(std::move(r));
        first_raster.push_back(comp.first_raster);
    }

    std::vector<size_t> order(rois.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (options.order == RoiOrder::PeakScore) {
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            if (rois[a].peak_score != rois[b].peak_score) return rois[a].peak_score > rois[b].peak_score;
            return rois[a].center < rois[b].center;
        });
    } else {
        std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return first_raster[a] < first_raster[b]; });
    }
    if (order.size() > static_cast<size_t>(options.cap)) order.resize(static_cast<size_t>(options.cap));

    std::vector<RoiRecord> out;
    out.reserve(order.size());
    for (size_t i = 0; i < order.size(); ++i) {
        RoiRecord r = std::move(rois[order[i]]);
        r.id = static_cast<int>(i) + 1;
        r.mean_spectrum = Eigen::VectorXd::Zero(cube.bands());
        for (const auto& p : r.members) r.mean_spectrum += cube.spectrum(p).transpose();
        r.mean_spectrum /= static_cast<double>(r.members.size());
        out.push_back(std::move(r));
    }
    return out;
}

void write_roi_csv(const std::vector<RoiRecord>& rois, std::ostream& out) {
    out << "id,line,sample,peak_score,pixel_count\n";
    for (const auto& r : rois)
        out << fmt::format("{},{},{},{:.12g},{}\n", r.id, r.center.line, r.center.sample, r.peak_score,
                           r.pixel_count());
}

void write_roi_csv(const std::vector<RoiRecord>& rois, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    write_roi_csv(rois, out);
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

void write_score_map(const AceScoreMap& map, const std::filesystem::path& header_path) {
    PixelMatrix<double> values = Eigen::Map<const PixelMatrix<double>>(map.scores.data(), map.lines * map.samples, 1);
    write_raster(header_path, map.lines, map.samples, 1, values, {},
                 WriteOptions{Interleave::Bsq, DataType::Float32, ByteOrder::Little});
}

} // namespace hsd
