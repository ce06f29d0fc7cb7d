#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <sstream>

#include "hsd/identify.hpp"
#include "hsd/synth.hpp"
#include "support.hpp"

using namespace hsd;

namespace {

AceScoreMap constant_map(Index lines, Index samples, double v) {
    AceScoreMap m;
    m.lines = lines;
    m.samples = samples;
    m.scores = Eigen::MatrixXd::Constant(lines, samples, v);
    return m;
}

RoiRecord point_roi(PixelCoord c, const HyperCube& cube) {
    RoiRecord r;
    r.id = 1;
    r.center = c;
    r.peak_score = 0.9;
    r.members = {c};
    r.mean_spectrum = cube.spectrum(c).transpose();
    return r;
}

WhiteningModel<double> identity_model(Index bands) {
    WhiteningModel<double> w;
    w.mean = Eigen::VectorXd::Zero(bands);
    w.transform = Eigen::MatrixXd::Identity(bands, bands);
    w.retained_eigenvalues = Eigen::VectorXd::Ones(bands);
    return w;
}

BackgroundSample background_at(const Eigen::VectorXd& mean) {
    BackgroundSample bg;
    bg.pixels = {{0, 0}};
    bg.spectra = PixelMatrix<double>(mean.transpose());
    return bg;
}

Eigen::VectorXd smooth_spectrum(Index bands, double phase) {
    Eigen::VectorXd v(bands);
    for (Index b = 0; b < bands; ++b) {
        const double x = static_cast<double>(b) / static_cast<double>(bands - 1);
        v(b) = 0.5 + 0.3 * std::sin(6.0 * x + phase) + 0.2 * x;
    }
    return v;
}

double probability_of(const ProbabilityTable& t, const std::string& label) {
    for (const auto& c : t)
        if (c.label == label) return c.probability;
    return -1.0;
}

} // namespace

TEST(Background, CenterRingHasFullCount) {
    const HyperCube cube = hsd::test::random_cube(64, 64, 3, 1);
    const auto map = constant_map(64, 64, 0.0);
    const auto bg = estimate_background(map, cube, point_roi({32, 32}, cube));
    EXPECT_EQ(bg.size(), 31 * 31 - 11 * 11);
    EXPECT_EQ(bg.spectra.rows(), 840);
    for (const auto& p : bg.pixels) {
        const Index d = std::max(std::abs(p.line - 32), std::abs(p.sample - 32));
        EXPECT_GT(d, 5);
        EXPECT_LE(d, 15);
    }
}

TEST(Background, CornerIsClipped) {
    const HyperCube cube = hsd::test::random_cube(64, 64, 3, 1);
    const auto map = constant_map(64, 64, 0.0);
    const auto bg = estimate_background(map, cube, point_roi({0, 0}, cube));
    EXPECT_EQ(bg.size(), 16 * 16 - 6 * 6);
}

TEST(Background, SkipsHighScoresAndMembers) {
    const HyperCube cube = hsd::test::random_cube(64, 64, 3, 1);
    auto map = constant_map(64, 64, 0.0);
    map.scores.block(32, 0, 32, 64).setConstant(0.5);
    RoiRecord roi = point_roi({32, 32}, cube);
    roi.members.push_back({20, 20});
    const auto bg = estimate_background(map, cube, roi);
    // line 17..31 of the ring: 15 rows; rows 17..26 fully, 27..31 without the inner box
    const Index expected = 10 * 31 + 5 * (31 - 11) - 1;
    EXPECT_EQ(bg.size(), expected);
}

TEST(Background, InsufficientWhenEverythingScoresHigh) {
    const HyperCube cube = hsd::test::random_cube(40, 40, 3, 1);
    const auto map = constant_map(40, 40, 0.2);
    EXPECT_HSD_ERROR(estimate_background(map, cube, point_roi({20, 20}, cube)), InsufficientBackground);
    EXPECT_HSD_ERROR(estimate_background(constant_map(40, 40, 0.0), cube, point_roi({20, 20}, cube), {5, 5, 0.2, 25}),
                     InvalidArgument);
}

TEST(SpectralFit, FixedPoints) {
    const Eigen::VectorXd r = smooth_spectrum(50, 0.3);
    EXPECT_NEAR(spectral_fit(r, r), 1.0, 1e-15);
    const Eigen::VectorXd neg = (2.0 * r.mean()) - r.array();
    EXPECT_NEAR(spectral_fit(neg, r), 0.0, 1e-15);
    EXPECT_NEAR(spectral_fit(3.0 * r.array() + 1.0, r), 1.0, 1e-12);
    EXPECT_HSD_ERROR(spectral_fit(Eigen::VectorXd::Constant(50, 0.4), r), ConstantSpectrum);
    EXPECT_HSD_ERROR(spectral_fit(r.head(10), r), LengthMismatch);
}

TEST(SpectralFit, OnePercentNoiseMonteCarlo) {
    const Eigen::VectorXd ref = smooth_spectrum(145, 1.1);
    const double range = ref.maxCoeff() - ref.minCoeff();
    std::mt19937_64 rng(145);
    std::normal_distribution<double> noise(0.0, 0.01 * range);
    double worst = 1.0;
    for (int i = 0; i < 1000; ++i) {
        Eigen::VectorXd roi = ref;
        for (Index b = 0; b < roi.size(); ++b) roi(b) += noise(rng);
        worst = std::min(worst, spectral_fit(roi, ref));
    }
    EXPECT_GE(worst, 0.99);
}

TEST(ClassProbability, SeparatedMatchDominates) {
    const Index n = 6;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n), b = a;
    b(0) = 10.0;
    Eigen::VectorXd bgm = Eigen::VectorXd::Zero(n);
    bgm(1) = 20.0;
    const SpectralLibrary lib({1, 2, 3, 4, 5, 6}, {{"A", MaterialKind::Target, a}, {"B", MaterialKind::Target, b}});
    const auto table = class_probability(a, lib, background_at(bgm), identity_model(n));
    ASSERT_EQ(table.size(), 3u);
    EXPECT_EQ(table.back().label, "background");
    EXPECT_GT(probability_of(table, "A"), 0.99);
    EXPECT_EQ(best_class(table).label, "A");
    EXPECT_DOUBLE_EQ(table[1].distance, 100.0);
}

TEST(ClassProbability, IdenticalEntriesTie) {
    const Eigen::VectorXd s = smooth_spectrum(5, 0.0);
    const SpectralLibrary lib({1, 2, 3, 4, 5}, {{"Z", MaterialKind::Target, s}, {"Y", MaterialKind::Target, s}});
    const auto table = class_probability(s.array() + 0.1, lib, background_at(s.array() + 3.0), identity_model(5));
    EXPECT_EQ(probability_of(table, "Z"), probability_of(table, "Y"));
    EXPECT_EQ(best_class(table).label, "Y");
}

TEST(ClassProbability, BackgroundMeanWins) {
    const Index n = 5;
    const SpectralLibrary lib({1, 2, 3, 4, 5}, {{"A", MaterialKind::Target, smooth_spectrum(n, 0.0)},
                                                {"C", MaterialKind::Confuser, smooth_spectrum(n, 2.0)}});
    const Eigen::VectorXd bgm = smooth_spectrum(n, 4.0);
    const auto table = class_probability(bgm, lib, background_at(bgm), identity_model(n));
    EXPECT_EQ(best_class(table).label, "background");
}

TEST(ClassProbability, ReservedNameAndGrid) {
    const SpectralLibrary bad({1, 2}, {{"background", MaterialKind::Target, Eigen::Vector2d(1, 2)}});
    EXPECT_HSD_ERROR(class_probability(Eigen::Vector2d(1, 2), bad, background_at(Eigen::Vector2d(0, 0)),
                                       identity_model(2)),
                     InvalidArgument);
    const SpectralLibrary lib({1, 2}, {{"A", MaterialKind::Target, Eigen::Vector2d(1, 2)}});
    EXPECT_HSD_ERROR(class_probability(Eigen::Vector3d(1, 2, 3), lib, background_at(Eigen::Vector3d::Zero()),
                                       identity_model(3)),
                     GridMismatch);
}

TEST(ClassProbability, SumsToOneAndIgnoresLabelOrder) {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> count(1, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const Index n = 4 + trial % 6;
        const int m = count(rng);
        std::vector<LibraryEntry> entries;
        for (int i = 0; i < m; ++i) entries.push_back({"E" + std::to_string(i), MaterialKind::Target,
                                                       hsd::test::random_gaussian(n, 1, rng)});
        std::vector<double> wl(static_cast<size_t>(n));
        for (Index b = 0; b < n; ++b) wl[static_cast<size_t>(b)] = static_cast<double>(b + 1);
        const Eigen::VectorXd roi = hsd::test::random_gaussian(n, 1, rng);
        const auto bg = background_at(hsd::test::random_gaussian(n, 1, rng));
        const auto w = identity_model(n);

        const auto table = class_probability(roi, SpectralLibrary(wl, entries), bg, w);
        double sum = 0.0;
        for (const auto& c : table) sum += c.probability;
        EXPECT_NEAR(sum, 1.0, 1e-9);

        std::shuffle(entries.begin(), entries.end(), rng);
        const auto shuffled = class_probability(roi, SpectralLibrary(wl, entries), bg, w);
        for (const auto& c : table) EXPECT_EQ(probability_of(shuffled, c.label), c.probability);
        EXPECT_EQ(best_class(shuffled).label, best_class(table).label);
    }
}

TEST(Identify, InsufficientBackgroundIsConservative) {
    const HyperCube cube = hsd::test::random_cube(20, 20, 4, 3);
    const SpectralLibrary lib({1, 2, 3, 4}, {{"A", MaterialKind::Target, cube.spectrum(5, 5).transpose()}});
    const auto r = identify(point_roi({10, 10}, cube), constant_map(20, 20, 0.9), cube, lib, identity_model(4));
    EXPECT_EQ(r.decision, Decision::NonTarget);
    EXPECT_EQ(r.flag, "insufficient_background");
    EXPECT_TRUE(r.per_class.empty());
}

TEST(Identify, LowFitVetoesTarget) {
    const HyperCube cube = hsd::test::random_cube(40, 40, 4, 3);
    const Eigen::VectorXd t = cube.spectrum(20, 20).transpose();
    const SpectralLibrary lib({1, 2, 3, 4}, {{"A", MaterialKind::Target, t}});
    const auto map = constant_map(40, 40, 0.0);
    IdentifyOptions opt;
    const auto ok = identify(point_roi({20, 20}, cube), map, cube, lib, identity_model(4), opt);
    ASSERT_EQ(ok.best_label, "A");
    EXPECT_EQ(ok.decision, Decision::Target);
    opt.f_min = 1.1;
    const auto vetoed = identify(point_roi({20, 20}, cube), map, cube, lib, identity_model(4), opt);
    EXPECT_EQ(vetoed.best_label, "A");
    EXPECT_EQ(vetoed.decision, Decision::NonTarget);
}

TEST(Identify, SyntheticTargetAndConfuser) {
    SceneSpec spec;
    spec.lines = 64;
    spec.samples = 64;
    spec.bands = 30;
    spec.seed = 5;
    spec.targets = {{"TA", {20, 20}, 3, 3, 1.0}};
    spec.confusers = {{"CA", {44, 44}, 3, 3, 1.0, "TA", 0.7}};
    const Scene scene = generate_scene(spec);
    const auto st = compute_stats(scene.cube);
    const auto w = whitening_matrix(eigendecompose(st), st.mean, scene.cube.bands());
    const auto wc = whiten_cube(w, scene.cube);
    const auto map = ace_map(wc, whiten_target(w, scene.library.at("TA").spectrum), "TA");
    const auto rois = extract_rois(map, scene.cube);

    const RoiRecord* on_target = nullptr;
    const RoiRecord* on_confuser = nullptr;
    for (const auto& r : rois) {
        if (std::max(std::abs(r.center.line - 20), std::abs(r.center.sample - 20)) <= 1) on_target = &r;
        if (std::max(std::abs(r.center.line - 44), std::abs(r.center.sample - 44)) <= 1) on_confuser = &r;
    }
    ASSERT_NE(on_target, nullptr);
    const auto rt = identify(*on_target, map, scene.cube, scene.library, w);
    EXPECT_EQ(rt.decision, Decision::Target);
    EXPECT_EQ(rt.best_label, "TA");
    EXPECT_GE(rt.spectral_fit, 0.99);

    // the confuser resembles the target at 0.7 and may or may not cross the threshold
    if (on_confuser) {
        const auto rc = identify(*on_confuser, map, scene.cube, scene.library, w);
        EXPECT_EQ(rc.decision, Decision::NonTarget);
        EXPECT_EQ(rc.best_label, "CA");
    } else {
        RoiRecord forced = point_roi({44, 44}, scene.cube);
        forced.members.clear();
        forced.mean_spectrum = Eigen::VectorXd::Zero(scene.cube.bands());
        for (Index l = 43; l <= 45; ++l)
            for (Index s = 43; s <= 45; ++s) {
                forced.members.push_back({l, s});
                forced.mean_spectrum += scene.cube.spectrum(l, s).transpose() / 9.0;
            }
        const auto rc = identify(forced, map, scene.cube, scene.library, w);
        EXPECT_EQ(rc.decision, Decision::NonTarget);
        EXPECT_EQ(rc.best_label, "CA");
    }
}

TEST(Identify, CsvLayout) {
    IdentificationResult r;
    r.roi_id = 3;
    r.center = {4, 5};
    r.peak_score = 0.75;
    r.best_label = "F1";
    r.probability = 0.5;
    r.spectral_fit = 0.25;
    r.decision = Decision::Target;
    std::ostringstream out;
    write_identification_csv({r}, out);
    EXPECT_EQ(out.str(), "roi_id,line,sample,peak_score,best_label,probability,spectral_fit,decision,flag\n"
                         "3,4,5,0.75,F1,0.5,0.25,target,\n");
}
