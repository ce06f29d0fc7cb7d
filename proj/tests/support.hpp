#pragma once

#include <Eigen/Core>
#include <Eigen/LU>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <random>
#include <string>
#include <unistd.h>

#include "hsd/cube.hpp"
#include "hsd/library.hpp"

namespace hsd::test {

// Runs `fn` and returns the hsd error code it threw; fails the test otherwise.
template <typename Fn>
std::optional<ErrorCode> thrown_code(Fn&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

#define EXPECT_HSD_ERROR(expr, code_) EXPECT_EQ(::hsd::test::thrown_code([&] { (void)(expr); }), ::hsd::ErrorCode::code_)

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "hsd") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Eigen::MatrixXd random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
    return m;
}

// Full-rank SPD matrix with a spread of eigenvalues.
inline Eigen::MatrixXd random_spd(Eigen::Index n, std::mt19937_64& rng) {
    const Eigen::MatrixXd a = random_gaussian(n, n, rng);
    Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(n) + 0.1 * Eigen::MatrixXd::Identity(n, n);
    return (s + s.transpose()) * 0.5;
}

// Correlated random cube: Gaussian pixels pushed through a random mixing
// matrix, plus an offset so the mean is not zero.
inline HyperCube random_cube(Eigen::Index lines, Eigen::Index samples, Eigen::Index bands, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Eigen::MatrixXd z = random_gaussian(lines * samples, bands, rng);
    const Eigen::MatrixXd mix = random_gaussian(bands, bands, rng) + 2.0 * Eigen::MatrixXd::Identity(bands, bands);
    PixelMatrix<double> px = z * mix;
    px.rowwise() += Eigen::RowVectorXd::LinSpaced(bands, 0.5, 1.5);
    return HyperCube(lines, samples, std::move(px));
}

// ACE through an explicit inverse covariance: no eigendecomposition, no whitening.
inline double sigma_inverse_ace(const Eigen::VectorXd& x, const Eigen::VectorXd& t, const Eigen::VectorXd& mu,
                                const Eigen::MatrixXd& sigma) {
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(sigma);
    const Eigen::VectorXd xc = x - mu, tc = t - mu;
    const Eigen::VectorXd si_x = lu.solve(xc), si_t = lu.solve(tc);
    return tc.dot(si_x) / std::sqrt(xc.dot(si_x) * tc.dot(si_t));
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace hsd::test
