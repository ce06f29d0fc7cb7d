#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "hsd/sweep.hpp"
#include "support.hpp"

using namespace hsd;
using hsd::test::TempDir;

namespace {

std::vector<std::string> target_names(const SpectralLibrary& lib) {
    std::vector<std::string> out;
    for (const auto& e : lib.entries())
        if (e.kind == MaterialKind::Target) out.push_back(e.name);
    return out;
}

size_t count_lines(const std::string& s) { return static_cast<size_t>(std::count(s.begin(), s.end(), '\n')); }

RankRun synthetic_run(Index k, std::vector<PixelCoord> centers, Decision d = Decision::Target) {
    RankRun run;
    run.k = k;
    TargetRun tr;
    tr.target = "T";
    int id = 1;
    for (auto c : centers) {
        RoiRecord r;
        r.id = id++;
        r.center = c;
        r.peak_score = 0.9;
        r.members = {c};
        tr.rois.push_back(r);
        IdentificationResult ir;
        ir.roi_id = r.id;
        ir.center = c;
        ir.best_label = "T";
        ir.decision = d;
        ir.probability = 0.8;
        ir.spectral_fit = 0.95;
        tr.ids.push_back(ir);
    }
    run.targets.push_back(std::move(tr));
    return run;
}

// One standard-scene sweep shared by the tests below.
class StandardSweep : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        scene_ = new Scene(generate_scene(standard_scene_spec()));
        result_ = new SweepResult(run_sweep(scene_->cube, scene_->library, target_names(scene_->library),
                                            SweepGrid::default_for(scene_->cube.bands()), {}, &scene_->truth));
    }
    static void TearDownTestSuite() {
        delete result_;
        delete scene_;
    }
    static Scene* scene_;
    static SweepResult* result_;
};
Scene* StandardSweep::scene_ = nullptr;
SweepResult* StandardSweep::result_ = nullptr;

} // namespace

TEST(Grid, DefaultAdaptsToBands) {
    const auto g145 = SweepGrid::default_for(145);
    ASSERT_EQ(g145.ks.size(), 29u);
    EXPECT_EQ(g145.ks.front(), 5);
    EXPECT_EQ(g145.ks.back(), 145);
    EXPECT_EQ(SweepGrid::default_for(50).ks.size(), 10u);
    EXPECT_EQ(SweepGrid::default_for(53).ks.back(), 50);
    EXPECT_EQ(SweepGrid::default_for(3).ks, std::vector<Index>{3});
}

TEST(Grid, Parse) {
    EXPECT_EQ(SweepGrid::parse("5:20:5").ks, (std::vector<Index>{5, 10, 15, 20}));
    EXPECT_EQ(SweepGrid::parse("5:145:5").ks.size(), 29u);
    EXPECT_EQ(SweepGrid::parse("3,7,50").ks, (std::vector<Index>{3, 7, 50}));
    EXPECT_HSD_ERROR(SweepGrid::parse("5:x:5"), InvalidArgument);
    EXPECT_HSD_ERROR(SweepGrid::parse("5:10"), InvalidArgument);
    EXPECT_HSD_ERROR(SweepGrid::parse("10:5:5"), InvalidArgument);
    EXPECT_HSD_ERROR(SweepGrid::parse(""), InvalidArgument);
}

TEST(Grid, Radius) {
    EXPECT_TRUE(within_radius({10, 10}, {13, 7}, 3, MatchMetric::Chebyshev));
    EXPECT_FALSE(within_radius({10, 10}, {14, 10}, 3, MatchMetric::Chebyshev));
    EXPECT_FALSE(within_radius({10, 10}, {13, 7}, 3, MatchMetric::Euclidean));
    EXPECT_TRUE(within_radius({10, 10}, {12, 12}, 3, MatchMetric::Euclidean));
}

TEST(Sweep, SingleFullRankPointEqualsDirectRun) {
    SceneSpec spec;
    spec.lines = 48;
    spec.samples = 48;
    spec.bands = 20;
    spec.seed = 12;
    spec.targets = {{"TA", {12, 12}, 3, 3, 1.0}, {"TA", {30, 30}, 2, 2, 0.9}};
    spec.confusers = {{"CA", {40, 10}, 2, 2, 1.0, "TA", 0.7}};
    const Scene s = generate_scene(spec);
    const auto result = run_sweep(s.cube, s.library, {"TA"}, SweepGrid{{20}});
    ASSERT_EQ(result.runs.size(), 1u);
    EXPECT_EQ(result.report.reference_k, 20);

    const auto st = compute_stats(s.cube);
    const auto w = whitening_matrix(eigendecompose(st), st.mean, 20);
    const auto map = ace_map(whiten_cube(w, s.cube), whiten_target(w, s.library.at("TA").spectrum), "TA");
    const auto rois = extract_rois(map, s.cube);
    const auto& got = result.runs[0].targets.at(0);
    ASSERT_EQ(got.rois.size(), rois.size());
    int confirmed = 0;
    for (size_t i = 0; i < rois.size(); ++i) {
        EXPECT_EQ(got.rois[i].center, rois[i].center);
        EXPECT_EQ(got.rois[i].peak_score, rois[i].peak_score);
        const auto id = identify(rois[i], map, s.cube, s.library, w);
        EXPECT_EQ(got.ids[i].decision, id.decision);
        EXPECT_EQ(got.ids[i].probability, id.probability);
        confirmed += id.decision == Decision::Target;
    }
    EXPECT_EQ(result.report.per_k[0].confirmed_target_count, confirmed);
    EXPECT_EQ(result.report.per_k[0].roi_count, static_cast<int>(rois.size()));
}

TEST(Sweep, FailedRankIsRecorded) {
    SceneSpec spec;
    spec.lines = 24;
    spec.samples = 24;
    spec.bands = 12;
    spec.seed = 1;
    spec.targets = {{"TA", {12, 12}, 3, 3, 1.0}};
    const Scene s = generate_scene(spec);
    const auto result = run_sweep(s.cube, s.library, {"TA"}, SweepGrid{{4, 12, 40}});
    ASSERT_EQ(result.report.per_k.size(), 3u);
    EXPECT_FALSE(result.report.per_k[1].failed);
    EXPECT_TRUE(result.report.per_k[2].failed);
    EXPECT_NE(result.report.per_k[2].failure.find("RankTooHigh"), std::string::npos);
    EXPECT_EQ(result.report.reference_k, 12);

    const auto json = nlohmann::json::parse(sweep_json(result, {}));
    EXPECT_EQ(json["per_k"][2]["status"], "failed");
    EXPECT_TRUE(json["per_k"][2]["target_ace_mean"].is_null());
    EXPECT_EQ(count_lines(envelope_csv(result.report)), 4u);
}

TEST(Sweep, RejectsBadInputs) {
    const HyperCube cube = hsd::test::random_cube(8, 8, 4, 1);
    const SpectralLibrary lib({0, 1, 2, 3}, {{"A", MaterialKind::Target, Eigen::VectorXd::Ones(4)}});
    EXPECT_HSD_ERROR(run_sweep(cube, lib, {"A"}, SweepGrid{{3, 2}}), InvalidArgument);
    EXPECT_HSD_ERROR(run_sweep(cube, lib, {"B"}, SweepGrid{{2}}), InvalidArgument);
    EXPECT_HSD_ERROR(run_sweep(cube, lib, {}, SweepGrid{{2}}), InvalidArgument);
    const SpectralLibrary wide({0, 1, 2, 3, 4}, {{"A", MaterialKind::Target, Eigen::VectorXd::Ones(5)}});
    EXPECT_HSD_ERROR(run_sweep(cube, wide, {"A"}, SweepGrid{{2}}), GridMismatch);
}

TEST(Sweep, RecomputePerKMatches) {
    SceneSpec spec;
    spec.lines = 40;
    spec.samples = 40;
    spec.bands = 15;
    spec.seed = 8;
    spec.targets = {{"TA", {10, 10}, 3, 3, 1.0}, {"TB", {30, 30}, 1, 1, 0.7}};
    const Scene s = generate_scene(spec);
    SweepConfig slow;
    slow.recompute_per_k = true;
    const auto a = run_sweep(s.cube, s.library, {"TA", "TB"}, SweepGrid::parse("5:15:5"));
    const auto b = run_sweep(s.cube, s.library, {"TA", "TB"}, SweepGrid::parse("5:15:5"), slow);
    ASSERT_EQ(a.runs.size(), b.runs.size());
    for (size_t i = 0; i < a.runs.size(); ++i)
        for (size_t t = 0; t < 2; ++t) {
            const auto& ra = a.runs[i].targets[t].rois;
            const auto& rb = b.runs[i].targets[t].rois;
            ASSERT_EQ(ra.size(), rb.size());
            for (size_t j = 0; j < ra.size(); ++j) EXPECT_NEAR(ra[j].peak_score, rb[j].peak_score, 1e-8);
        }
}

TEST(Sweep, EnvelopeRowsFor145Bands) {
    SceneSpec spec;
    spec.lines = 24;
    spec.samples = 24;
    spec.bands = 145;
    spec.seed = 145;
    spec.targets = {{"TA", {12, 12}, 3, 3, 1.0}};
    const Scene s = generate_scene(spec);
    const auto result = run_sweep(s.cube, s.library, {"TA"}, SweepGrid::default_for(145));
    EXPECT_EQ(result.runs.size(), 29u);
    EXPECT_EQ(count_lines(envelope_csv(result.report)), 1u + 29u);
    for (const auto& p : result.report.per_k) EXPECT_FALSE(p.failed) << p.k;
}

TEST(Tracks, PresentEverywhereAndMissingAtLowK) {
    std::vector<RankRun> runs = {synthetic_run(5, {{40, 40}}), synthetic_run(10, {{20, 20}, {40, 41}}),
                                 synthetic_run(15, {{20, 20}, {40, 40}})};
    const auto tracks = track_objects(runs);
    ASSERT_EQ(tracks.size(), 2u);
    EXPECT_EQ(tracks[0].reference_center, (PixelCoord{20, 20}));
    ASSERT_EQ(tracks[0].per_k_hits.size(), 3u);
    EXPECT_FALSE(tracks[0].per_k_hits[0].matched);
    EXPECT_EQ(tracks[0].per_k_hits[0].k, 5);
    EXPECT_TRUE(tracks[0].per_k_hits[1].matched);
    for (const auto& h : tracks[1].per_k_hits) EXPECT_TRUE(h.matched);
    EXPECT_EQ(tracks[1].per_k_hits[1].roi_center, (PixelCoord{40, 41}));

    const std::string csv = tracks_csv(tracks);
    EXPECT_NE(csv.find("1,5,0,,,,,,\n"), std::string::npos);
    EXPECT_EQ(count_lines(csv), 1u + 6u);
}

TEST(Tracks, OnlyConfirmedReferenceRoisBecomeObjects) {
    std::vector<RankRun> runs = {synthetic_run(5, {{1, 1}}), synthetic_run(10, {{1, 1}}, Decision::NonTarget)};
    EXPECT_TRUE(track_objects(runs).empty());
    runs.push_back(synthetic_run(15, {}));
    runs.back().failed = true;
    EXPECT_TRUE(track_objects(runs).empty());
}

TEST(Report, EmptyTracksStillWritten) {
    TempDir dir;
    SweepResult result;
    result.report.per_k.push_back({});
    emit_report(result, {}, dir.path());
    for (const char* f : {"envelope.csv", "tracks.csv", "identifications.csv", "sweep.json", "envelope.svg",
                          "tracks.svg"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_EQ(hsd::test::read_file(dir / "tracks.csv"),
              "object_id,k,matched,line,sample,peak_score,probability,spectral_fit,best_label\n");

    TempDir only_json;
    emit_report(result, {}, only_json.path(), {ReportFormat::Json});
    EXPECT_FALSE(std::filesystem::exists(only_json / "envelope.csv"));
    EXPECT_TRUE(std::filesystem::exists(only_json / "sweep.json"));
}

TEST_F(StandardSweep, EnvelopeHasOneRowPerGridPoint) {
    EXPECT_EQ(result_->report.per_k.size(), 10u);
    EXPECT_EQ(count_lines(envelope_csv(result_->report)), 11u);
    EXPECT_EQ(result_->report.reference_k, 50);
    for (const auto& p : result_->report.per_k) {
        EXPECT_FALSE(p.failed);
        EXPECT_EQ(p.wall_ms, 0.0);
        EXPECT_EQ(p.roi_count, p.confirmed_target_count + p.false_detection_count);
    }
}

TEST_F(StandardSweep, LowRankRaisesFalseDetections) {
    const auto& pk = result_->report.per_k;
    EXPECT_GE(pk.front().false_detection_count, pk.back().false_detection_count);
}

TEST_F(StandardSweep, FullRankFindsPlantedTargets) {
    ASSERT_TRUE(result_->report.per_k.back().truth_detection_rate.has_value());
    EXPECT_GE(*result_->report.per_k.back().truth_detection_rate, 0.95);
}

TEST_F(StandardSweep, SmallTargetAppearsOnlyAtHigherRank) {
    const auto first = truth_matches(result_->runs.front(), scene_->truth, 3);
    const auto last = truth_matches(result_->runs.back(), scene_->truth, 3);
    std::vector<const GroundTruthEntry*> targets;
    for (const auto& e : scene_->truth.entries)
        if (e.kind == MaterialKind::Target) targets.push_back(&e);
    ASSERT_EQ(targets.size(), first.size());
    bool found = false;
    for (size_t i = 0; i < targets.size(); ++i)
        if (targets[i]->members.size() == 1 && targets[i]->abundance < 1.0 && !first[i] && last[i]) found = true;
    EXPECT_TRUE(found);
}

TEST_F(StandardSweep, FullRankConfirmsEveryLowRankConfirmation) {
    // planted targets confirmed at k = 5 are also confirmed at full rank
    auto confirmed = [&](const RankRun& run) {
        std::set<size_t> hit;
        for (size_t i = 0; i < scene_->truth.entries.size(); ++i) {
            const auto& e = scene_->truth.entries[i];
            if (e.kind != MaterialKind::Target) continue;
            for (const auto& tr : run.targets)
                for (size_t j = 0; j < tr.rois.size(); ++j)
                    if (tr.target == e.label && tr.ids[j].decision == Decision::Target &&
                        within_radius(e.center, tr.rois[j].center, 3, MatchMetric::Chebyshev))
                        hit.insert(i);
        }
        return hit;
    };
    const auto low = confirmed(result_->runs.front());
    const auto full = confirmed(result_->runs.back());
    EXPECT_TRUE(std::includes(full.begin(), full.end(), low.begin(), low.end()));
}

TEST_F(StandardSweep, ReportsAreByteIdentical) {
    TempDir a, b;
    const auto tracks = track_objects(result_->runs);
    EXPECT_FALSE(tracks.empty());
    emit_report(*result_, tracks, a.path());
    const auto again = run_sweep(scene_->cube, scene_->library, target_names(scene_->library),
                                 SweepGrid::default_for(scene_->cube.bands()), {}, &scene_->truth);
    emit_report(again, track_objects(again.runs), b.path());
    for (const char* f : {"envelope.csv", "tracks.csv", "identifications.csv", "sweep.json", "envelope.svg",
                          "tracks.svg"})
        EXPECT_EQ(hsd::test::read_file(a / f), hsd::test::read_file(b / f)) << f;
}

TEST_F(StandardSweep, ThreadCountDoesNotChangeReport) {
    SweepConfig cfg;
    cfg.threads = 3;
    const auto threaded = run_sweep(scene_->cube, scene_->library, target_names(scene_->library),
                                    SweepGrid::parse("5,50"), cfg, &scene_->truth);
    EXPECT_EQ(envelope_csv(threaded.report),
              envelope_csv(SweepReport{{result_->report.per_k.front(), result_->report.per_k.back()}, 50}));
}
