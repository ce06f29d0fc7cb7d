// hsd: synthetic scenes, ACE detection, identification and PC-count sweeps.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hsd/cube.hpp"
#include "hsd/detect.hpp"
#include "hsd/identify.hpp"
#include "hsd/library.hpp"
#include "hsd/pca.hpp"
#include "hsd/sweep.hpp"
#include "hsd/synth.hpp"
#include "hsd/whitening_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

int exit_code(const hsd::Error& e) {
    switch (hsd::category(e.code())) {
    case hsd::ErrorCategory::Numerical: return kExitNumerical;
    case hsd::ErrorCategory::Io: return kExitIo;
    case hsd::ErrorCategory::Input: break;
    }
    return kExitInput;
}

hsd::BandMask read_band_mask(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw hsd::Error(hsd::ErrorCode::IoFailure, "cannot open band mask " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    for (auto& c : text)
        if (c == ',') c = ' ';
    std::istringstream tokens(text);
    hsd::BandMask mask;
    std::string tok;
    while (tokens >> tok) {
        if (tok == "1") mask.keep.push_back(true);
        else if (tok == "0") mask.keep.push_back(false);
        else throw hsd::Error(hsd::ErrorCode::InvalidArgument, "band mask entries must be 0 or 1, got '" + tok + "'");
    }
    return mask;
}

struct Inputs {
    std::string cube_path;
    std::string library_path;
    std::string mask_path;
};

struct Loaded {
    hsd::HyperCube cube;
    hsd::SpectralLibrary library;
};

Loaded load_inputs(const Inputs& in) {
    hsd::HyperCube cube = hsd::load_cube(in.cube_path);
    hsd::SpectralLibrary library = hsd::load_spectral_library(in.library_path);
    if (!in.mask_path.empty()) {
        const hsd::BandMask mask = read_band_mask(in.mask_path);
        const hsd::Index sensor_bands = cube.bands();
        cube = hsd::apply_band_mask(cube, mask); // validates the mask length
        // A library on the sensor grid is masked along with the cube.
        if (library.bands() == sensor_bands) {
            std::vector<hsd::LibraryEntry> entries;
            std::vector<double> wl;
            for (size_t b = 0; b < mask.keep.size(); ++b)
                if (mask.keep[b]) wl.push_back(library.wavelengths()[b]);
            for (const auto& e : library.entries()) {
                Eigen::VectorXd s(mask.kept_count());
                hsd::Index j = 0;
                for (size_t b = 0; b < mask.keep.size(); ++b)
                    if (mask.keep[b]) s(j++) = e.spectrum(static_cast<hsd::Index>(b));
                entries.push_back({e.name, e.kind, std::move(s)});
            }
            library = hsd::SpectralLibrary(std::move(wl), std::move(entries));
        }
    }
    hsd::check_grid(library, cube);
    return {std::move(cube), std::move(library)};
}

void add_inputs(CLI::App* cmd, Inputs& in) {
    cmd->add_option("--cube", in.cube_path, "ENVI header of the cube")->required();
    cmd->add_option("--library", in.library_path, "spectral library CSV")->required();
    cmd->add_option("--band-mask", in.mask_path, "file of 0/1 flags, one per band");
}

struct DetectArgs {
    Inputs inputs;
    std::string target;
    hsd::Index k = 0;
    double threshold = 0.5;
    int cap = 100;
    std::string order = "peak";
    bool squared = false;
    std::string out;
    std::string score_map;
    std::string save_model;
};

struct IdentifyArgs {
    DetectArgs detect;
    double p_min = 0.5;
    double f_min = 0.5;
    int inner = 5;
    int outer = 15;
    double max_ace = 0.2;
    int min_background = 25;
};

void add_detect_options(CLI::App* cmd, DetectArgs& a) {
    add_inputs(cmd, a.inputs);
    cmd->add_option("--target", a.target, "library entry to detect")->required();
    cmd->add_option("-k,--rank", a.k, "number of principal components")->required()->check(CLI::PositiveNumber);
    cmd->add_option("--threshold", a.threshold, "ACE detection threshold")->capture_default_str();
    cmd->add_option("--cap", a.cap, "maximum number of ROIs")->capture_default_str();
    cmd->add_option("--order", a.order, "ROI ranking: peak or raster")
        ->check(CLI::IsMember({"peak", "raster"}))
        ->capture_default_str();
    cmd->add_flag("--squared", a.squared, "use squared ACE");
    cmd->add_option("--out", a.out, "output CSV (default stdout)");
    cmd->add_option("--score-map", a.score_map, "write the ACE map as a single-band cube header");
    cmd->add_option("--save-model", a.save_model, "write the whitening model sidecar");
}

struct Detection {
    Loaded data;
    hsd::WhiteningModel<double> model;
    hsd::AceScoreMap map;
    std::vector<hsd::RoiRecord> rois;
};

Detection run_detection(const DetectArgs& a) {
    Detection d{load_inputs(a.inputs), {}, {}, {}};
    const auto stats = hsd::compute_stats(d.data.cube);
    d.model = hsd::whitening_matrix(hsd::eigendecompose(stats), stats.mean, a.k);
    if (!a.save_model.empty()) hsd::save_whitening_model(d.model, a.save_model);
    const auto wcube = hsd::whiten_cube(d.model, d.data.cube);
    const Eigen::VectorXd t_hat = hsd::whiten_target(d.model, d.data.library.at(a.target).spectrum);
    d.map = hsd::ace_map(wcube, t_hat, a.target, a.squared ? hsd::AceForm::Squared : hsd::AceForm::Unsquared);
    if (!a.score_map.empty()) hsd::write_score_map(d.map, a.score_map);
    d.rois = hsd::extract_rois(
        d.map, d.data.cube,
        hsd::RoiOptions{a.threshold, a.cap, a.order == "raster" ? hsd::RoiOrder::Raster : hsd::RoiOrder::PeakScore});
    return d;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ','))
        if (!part.empty()) out.push_back(part);
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hyperspectral ACE detection and principal-component sweep toolkit"};
    app.require_subcommand(1);

    // synth
    std::string spec_path = "standard", synth_out, synth_name = "scene";
    std::optional<std::uint64_t> seed;
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic scene");
    synth->add_option("--spec", spec_path, "scene spec JSON, or 'standard'")->capture_default_str();
    synth->add_option("--seed", seed, "override the spec seed");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--name", synth_name, "cube file stem")->capture_default_str();

    // detect
    DetectArgs detect_args;
    auto* detect = app.add_subcommand("detect", "ACE detection and ROI extraction at one rank");
    add_detect_options(detect, detect_args);

    // identify
    IdentifyArgs id_args;
    auto* ident = app.add_subcommand("identify", "detection followed by ROI identification");
    add_detect_options(ident, id_args.detect);
    ident->add_option("--p-min", id_args.p_min, "minimum class probability")->capture_default_str();
    ident->add_option("--f-min", id_args.f_min, "minimum spectral fit")->capture_default_str();
    ident->add_option("--inner", id_args.inner, "background ring inner radius")->capture_default_str();
    ident->add_option("--outer", id_args.outer, "background ring outer radius")->capture_default_str();
    ident->add_option("--max-ace", id_args.max_ace, "background ACE cutoff")->capture_default_str();
    ident->add_option("--min-background", id_args.min_background, "minimum background sample")->capture_default_str();

    // sweep
    Inputs sweep_inputs;
    std::string targets, grid_text, sweep_out, formats = "csv,json,svg", metric = "chebyshev", truth_path;
    hsd::SweepConfig cfg;
    auto* sweep = app.add_subcommand("sweep", "detection and identification across PC counts");
    add_inputs(sweep, sweep_inputs);
    sweep->add_option("--targets", targets, "comma-separated target names")->required();
    sweep->add_option("--grid", grid_text, "start:stop:step or comma list (default 5:bands:5)");
    sweep->add_option("--out", sweep_out, "output directory")->required();
    sweep->add_option("--formats", formats, "any of csv,json,svg")->capture_default_str();
    sweep->add_option("--radius", cfg.radius, "object match radius in pixels")->capture_default_str();
    sweep->add_option("--metric", metric, "chebyshev or euclidean")
        ->check(CLI::IsMember({"chebyshev", "euclidean"}))
        ->capture_default_str();
    sweep->add_option("--truth", truth_path, "truth.csv for ground-truth rates");
    sweep->add_option("--threshold", cfg.roi.threshold, "ACE detection threshold")->capture_default_str();
    sweep->add_option("--cap", cfg.roi.cap, "maximum ROIs per target and rank")->capture_default_str();
    sweep->add_option("--p-min", cfg.identify.p_min, "minimum class probability")->capture_default_str();
    sweep->add_option("--f-min", cfg.identify.f_min, "minimum spectral fit")->capture_default_str();
    sweep->add_flag("--timing", cfg.record_timing, "record wall time per rank (output no longer reproducible)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitInput;
    }

    try {
        if (*synth) {
            hsd::SceneSpec spec = spec_path == "standard" ? hsd::standard_scene_spec() : hsd::load_scene_spec(spec_path);
            if (seed) spec.seed = *seed;
            const hsd::Scene scene = hsd::generate_scene(spec);
            hsd::write_scene(scene, synth_out, synth_name);
            std::ofstream(std::filesystem::path(synth_out) / "spec.json") << hsd::to_json(spec).dump(2) << '\n';
            std::cout << "wrote " << scene.cube.lines() << "x" << scene.cube.samples() << "x" << scene.cube.bands()
                      << " scene with " << scene.truth.entries.size() << " planted objects to " << synth_out << '\n';
        } else if (*detect) {
            const Detection d = run_detection(detect_args);
            if (detect_args.out.empty()) hsd::write_roi_csv(d.rois, std::cout);
            else hsd::write_roi_csv(d.rois, std::filesystem::path(detect_args.out));
        } else if (*ident) {
            const Detection d = run_detection(id_args.detect);
            hsd::IdentifyOptions opts;
            opts.p_min = id_args.p_min;
            opts.f_min = id_args.f_min;
            opts.background = {id_args.inner, id_args.outer, id_args.max_ace, id_args.min_background};
            std::vector<hsd::IdentificationResult> results;
            for (const auto& roi : d.rois)
                results.push_back(hsd::identify(roi, d.map, d.data.cube, d.data.library, d.model, opts));
            if (id_args.detect.out.empty()) hsd::write_identification_csv(results, std::cout);
            else hsd::write_identification_csv(results, std::filesystem::path(id_args.detect.out));
        } else if (*sweep) {
            const Loaded data = load_inputs(sweep_inputs);
            const hsd::SweepGrid grid =
                grid_text.empty() ? hsd::SweepGrid::default_for(data.cube.bands()) : hsd::SweepGrid::parse(grid_text);
            cfg.metric = metric == "euclidean" ? hsd::MatchMetric::Euclidean : hsd::MatchMetric::Chebyshev;
            std::set<hsd::ReportFormat> fmts;
            for (const auto& f : split_list(formats)) {
                if (f == "csv") fmts.insert(hsd::ReportFormat::Csv);
                else if (f == "json") fmts.insert(hsd::ReportFormat::Json);
                else if (f == "svg") fmts.insert(hsd::ReportFormat::Svg);
                else throw hsd::Error(hsd::ErrorCode::InvalidArgument, "unknown report format '" + f + "'");
            }
            std::optional<hsd::GroundTruth> truth;
            if (!truth_path.empty()) truth = hsd::load_truth_csv(truth_path);
            const auto result = hsd::run_sweep(data.cube, data.library, split_list(targets), grid, cfg,
                                               truth ? &*truth : nullptr);
            const auto tracks = hsd::track_objects(result.runs, cfg.radius, cfg.metric);
            hsd::emit_report(result, tracks, sweep_out, fmts);
            int failed = 0;
            for (const auto& p : result.report.per_k) failed += p.failed ? 1 : 0;
            std::cout << "swept " << result.report.per_k.size() << " ranks (" << failed << " failed), "
                      << tracks.size() << " tracked objects, reference k = " << result.report.reference_k << '\n';
        }
    } catch (const hsd::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitOk;
}
