#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "hsd/sweep.hpp"

namespace hsd {
namespace {

std::string num(double v) { return std::isfinite(v) ? fmt::format("{:.12g}", v) : std::string("nan"); }

nlohmann::ordered_json json_num(double v) {
    if (!std::isfinite(v)) return nullptr;
    return v;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoFailure, "failed writing " + path.string());
}

// Maps data coordinates onto a fixed plot rectangle.
struct Axes {
    double x0, x1, y0, y1;
    double left = 60, right = 580, top = 30, bottom = 330;

    double px(double x) const { return x1 > x0 ? left + (x - x0) / (x1 - x0) * (right - left) : 0.5 * (left + right); }
    double py(double y) const { return bottom - (y - y0) / (y1 - y0) * (bottom - top); }
};

std::string svg_frame(const Axes& ax, const std::string& title, const std::vector<Index>& ks) {
    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"380\" viewBox=\"0 0 640 380\">\n";
    s += "<rect width=\"640\" height=\"380\" fill=\"white\"/>\n";
    s += fmt::format("<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"13\">{}</text>\n", title);
    s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"none\" stroke=\"black\"/>\n",
                     ax.left, ax.top, ax.right - ax.left, ax.bottom - ax.top);
    for (int i = 0; i <= 4; ++i) {
        const double y = ax.y0 + (ax.y1 - ax.y0) * i / 4.0;
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\" font-size=\"10\">{:.2f}</text>\n",
                         ax.left - 4, ax.py(y) + 3, y);
    }
    const size_t stride = std::max<size_t>(1, ks.size() / 10);
    for (size_t i = 0; i < ks.size(); i += stride)
        s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\" font-size=\"10\">{}</text>\n",
                         ax.px(static_cast<double>(ks[i])), ax.bottom + 14, ks[i]);
    s += fmt::format("<text x=\"320\" y=\"370\" text-anchor=\"middle\" font-size=\"11\">principal components (k)</text>\n");
    return s;
}

Axes axes_for(const std::vector<Index>& ks) {
    Axes ax{0, 1, -1, 1};
    if (!ks.empty()) {
        ax.x0 = static_cast<double>(*std::min_element(ks.begin(), ks.end()));
        ax.x1 = static_cast<double>(*std::max_element(ks.begin(), ks.end()));
    }
    return ax;
}

} // namespace

std::string envelope_csv(const SweepReport& report) {
    std::string s = "k,target_mean,target_std,nontarget_mean,nontarget_std,roi_count,confirmed,false,wall_ms\n";
    for (const auto& p : report.per_k)
        s += fmt::format("{},{},{},{},{},{},{},{},{}\n", p.k, num(p.target_ace_mean), num(p.target_ace_std),
                         num(p.nontarget_ace_mean), num(p.nontarget_ace_std), p.roi_count, p.confirmed_target_count,
                         p.false_detection_count, num(p.wall_ms));
    return s;
}

std::string tracks_csv(const std::vector<ObjectTrack>& tracks) {
    std::string s = "object_id,k,matched,line,sample,peak_score,probability,spectral_fit,best_label\n";
    for (const auto& t : tracks)
        for (const auto& h : t.per_k_hits) {
            if (h.matched)
                s += fmt::format("{},{},1,{},{},{},{},{},{}\n", t.object_id, h.k, h.roi_center.line, h.roi_center.sample,
                                 num(h.peak_score), num(h.probability), num(h.spectral_fit), h.best_label);
            else
                s += fmt::format("{},{},0,,,,,,\n", t.object_id, h.k);
        }
    return s;
}

std::string identifications_csv(const std::vector<RankRun>& runs) {
    std::string s = "k,target,roi_id,line,sample,peak_score,best_label,probability,spectral_fit,decision,flag\n";
    for (const auto& run : runs)
        for (const auto& tr : run.targets)
            for (const auto& r : tr.ids)
                s += fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", run.k, tr.target, r.roi_id, r.center.line,
                                 r.center.sample, num(r.peak_score), r.best_label, num(r.probability),
                                 num(r.spectral_fit), r.decision == Decision::Target ? "target" : "non-target", r.flag);
    return s;
}

std::string sweep_json(const SweepResult& result, const std::vector<ObjectTrack>& tracks) {
    nlohmann::ordered_json j;
    j["reference_k"] = result.report.reference_k;
    auto& per_k = j["per_k"] = nlohmann::ordered_json::array();
    for (const auto& p : result.report.per_k) {
        nlohmann::ordered_json e;
        e["k"] = p.k;
        e["status"] = p.failed ? "failed" : "ok";
        if (p.failed) e["failure"] = p.failure;
        e["target_ace_mean"] = json_num(p.target_ace_mean);
        e["target_ace_std"] = json_num(p.target_ace_std);
        e["nontarget_ace_mean"] = json_num(p.nontarget_ace_mean);
        e["nontarget_ace_std"] = json_num(p.nontarget_ace_std);
        e["roi_count"] = p.roi_count;
        e["confirmed_target_count"] = p.confirmed_target_count;
        e["false_detection_count"] = p.false_detection_count;
        e["wall_ms"] = p.wall_ms;
        if (p.truth_detection_rate) e["truth_detection_rate"] = *p.truth_detection_rate;
        if (p.truth_confirmed_rate) e["truth_confirmed_rate"] = *p.truth_confirmed_rate;
        per_k.push_back(std::move(e));
    }
    auto& jt = j["tracks"] = nlohmann::ordered_json::array();
    for (const auto& t : tracks) {
        nlohmann::ordered_json e;
        e["object_id"] = t.object_id;
        e["target"] = t.target;
        e["reference_center"] = {t.reference_center.line, t.reference_center.sample};
        auto& hits = e["per_k_hits"] = nlohmann::ordered_json::array();
        for (const auto& h : t.per_k_hits) {
            nlohmann::ordered_json x;
            x["k"] = h.k;
            x["matched"] = h.matched;
            if (h.matched) {
                x["roi_center"] = {h.roi_center.line, h.roi_center.sample};
                x["peak_score"] = json_num(h.peak_score);
                x["probability"] = json_num(h.probability);
                x["spectral_fit"] = json_num(h.spectral_fit);
                x["best_label"] = h.best_label;
                x["best_stem"] = material_stem(h.best_label);
            }
            hits.push_back(std::move(x));
        }
        jt.push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

std::string envelope_svg(const SweepReport& report) {
    std::vector<Index> ks;
    for (const auto& p : report.per_k) ks.push_back(p.k);
    const Axes ax = axes_for(ks);
    std::string s = svg_frame(ax, "ACE envelope: confirmed targets vs false detections", ks);

    auto band = [&](auto mean_of, auto std_of, const char* color) {
        std::string upper, lower, line;
        std::vector<std::pair<double, double>> lo;
        for (const auto& p : report.per_k) {
            const double m = mean_of(p), sd = std_of(p);
            if (!std::isfinite(m)) continue;
            const double x = ax.px(static_cast<double>(p.k));
            upper += fmt::format("{:.2f},{:.2f} ", x, ax.py(std::min(1.0, m + sd)));
            lo.emplace_back(x, ax.py(std::max(-1.0, m - sd)));
            line += fmt::format("{:.2f},{:.2f} ", x, ax.py(m));
        }
        for (auto it = lo.rbegin(); it != lo.rend(); ++it) lower += fmt::format("{:.2f},{:.2f} ", it->first, it->second);
        if (line.empty()) return;
        s += fmt::format("<polygon points=\"{}{}\" fill=\"{}\" fill-opacity=\"0.2\" stroke=\"none\"/>\n", upper, lower, color);
        s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"2\"/>\n", line, color);
    };
    band([](const SweepPoint& p) { return p.target_ace_mean; }, [](const SweepPoint& p) { return p.target_ace_std; },
         "green");
    band([](const SweepPoint& p) { return p.nontarget_ace_mean; },
         [](const SweepPoint& p) { return p.nontarget_ace_std; }, "blue");
    s += "</svg>\n";
    return s;
}

std::string tracks_svg(const std::vector<ObjectTrack>& tracks) {
    std::vector<Index> ks;
    if (!tracks.empty())
        for (const auto& h : tracks.front().per_k_hits) ks.push_back(h.k);
    const Axes ax = axes_for(ks);
    std::string s = svg_frame(ax, "Peak ACE per tracked object", ks);
    for (const auto& t : tracks) {
        std::string seg;
        auto flush = [&] {
            if (!seg.empty())
                s += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"green\" stroke-opacity=\"0.6\"/>\n", seg);
            seg.clear();
        };
        for (const auto& h : t.per_k_hits) {
            if (!h.matched) {
                flush();
                continue;
            }
            const double x = ax.px(static_cast<double>(h.k)), y = ax.py(h.peak_score);
            seg += fmt::format("{:.2f},{:.2f} ", x, y);
            s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2\" fill=\"green\"/>\n", x, y);
        }
        flush();
    }
    s += "</svg>\n";
    return s;
}

void emit_report(const SweepResult& result, const std::vector<ObjectTrack>& tracks, const std::filesystem::path& out_dir,
                 const std::set<ReportFormat>& formats) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
    if (formats.count(ReportFormat::Csv)) {
        write_text(out_dir / "envelope.csv", envelope_csv(result.report));
        write_text(out_dir / "tracks.csv", tracks_csv(tracks));
        write_text(out_dir / "identifications.csv", identifications_csv(result.runs));
    }
    if (formats.count(ReportFormat::Json)) write_text(out_dir / "sweep.json", sweep_json(result, tracks));
    if (formats.count(ReportFormat::Svg)) {
        write_text(out_dir / "envelope.svg", envelope_svg(result.report));
        write_text(out_dir / "tracks.svg", tracks_svg(tracks));
    }
}

} // namespace hsd
