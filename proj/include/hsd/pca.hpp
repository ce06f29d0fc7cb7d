#pragma once

#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "hsd/cube.hpp"
#include "hsd/error.hpp"
#include "hsd/parallel.hpp"

namespace hsd {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Scene mean and sample covariance (1/(N-1) normalization).
template <typename Scalar>
struct SceneStats {
    Vector<Scalar> mean;
    Matrix<Scalar> covariance;
    Index pixel_count = 0;

    Index bands() const noexcept { return mean.size(); }
    /// Fewer pixels than bands + 1: the sample covariance cannot be full rank.
    bool degenerate() const noexcept { return pixel_count < bands() + 1; }
};

/// Eigenpairs sorted by descending eigenvalue; column i of `eigenvectors`
/// belongs to `eigenvalues(i)`.
template <typename Scalar>
struct EigenModel {
    Vector<Scalar> eigenvalues;
    Matrix<Scalar> eigenvectors;

    Index bands() const noexcept { return eigenvalues.size(); }

    /// Number of eigenvalues above the rank floor `lambda_1 * rel_floor`.
    Index usable_rank(Scalar rel_floor = Scalar(1e-12)) const noexcept {
        if (eigenvalues.size() == 0 || !(eigenvalues(0) > Scalar(0))) return 0;
        const Scalar floor = eigenvalues(0) * rel_floor;
        Index k = 0;
        while (k < eigenvalues.size() && eigenvalues(k) > floor) ++k;
        return k;
    }
};

/// Truncated whitening transform. `transform` is bands × rank; column i is
/// the i-th principal direction scaled by 1/sqrt(lambda_i).
template <typename Scalar>
struct WhiteningModel {
    Vector<Scalar> mean;
    Matrix<Scalar> transform;
    Vector<Scalar> retained_eigenvalues;

    Index bands() const noexcept { return transform.rows(); }
    Index rank() const noexcept { return transform.cols(); }
};

/// Whitened raster, lines × samples × rank, one pixel per row.
template <typename Scalar>
struct WhitenedCube {
    Index lines = 0;
    Index samples = 0;
    PixelMatrix<Scalar> data;

    Index rank() const noexcept { return data.cols(); }
    auto pixel(Index line, Index sample) const { return data.row(line * samples + sample); }
};

/// Two-pass mean/covariance over the rows of `pixels` (N × bands). The
/// reduction order is fixed, so results are reproducible run to run.
template <typename Derived>
SceneStats<typename Derived::Scalar> compute_stats(const Eigen::MatrixBase<Derived>& pixels) {
    using Scalar = typename Derived::Scalar;
    const Index n = pixels.rows();
    if (n < 2) throw Error(ErrorCode::DegenerateScene, "need at least 2 pixels, got " + std::to_string(n));

    SceneStats<Scalar> stats;
    stats.pixel_count = n;
    stats.mean = pixels.colwise().sum().transpose() / static_cast<Scalar>(n);
    // residual correction: a constant column centers to exactly zero
    stats.mean += (pixels.rowwise() - stats.mean.transpose()).colwise().sum().transpose() / static_cast<Scalar>(n);
    const Matrix<Scalar> centered = pixels.rowwise() - stats.mean.transpose();
    Matrix<Scalar> cov = (centered.transpose() * centered) / static_cast<Scalar>(n - 1);
    stats.covariance = (cov + cov.transpose()) * Scalar(0.5);
    return stats;
}

inline SceneStats<double> compute_stats(const HyperCube& cube) { return compute_stats(cube.pixels()); }

/// Symmetric eigendecomposition of a covariance matrix.
///
/// Eigenvalues within -1e-10 * lambda_max of zero are clamped to zero; lower
/// values raise NotPSD. Pairs are stably sorted by descending eigenvalue, and
/// each eigenvector is signed so its largest-magnitude component (lowest index
/// on ties) is positive.
template <typename Derived>
EigenModel<typename Derived::Scalar> eigendecompose(const Eigen::MatrixBase<Derived>& covariance) {
    using Scalar = typename Derived::Scalar;
    if (covariance.rows() != covariance.cols() || covariance.rows() == 0)
        throw Error(ErrorCode::InvalidArgument, "covariance must be square and non-empty");

    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(covariance.eval());
    if (solver.info() != Eigen::Success)
        throw Error(ErrorCode::NotConverged, "symmetric eigensolver did not converge");

    const Vector<Scalar>& raw_values = solver.eigenvalues();
    const Index n = raw_values.size();
    const Scalar lambda_max = raw_values.maxCoeff();
    const Scalar tolerance = Scalar(1e-10) * std::max(lambda_max, Scalar(0));

    std::vector<Index> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return raw_values(a) > raw_values(b); });

    EigenModel<Scalar> model;
    model.eigenvalues.resize(n);
    model.eigenvectors.resize(n, n);
    for (Index i = 0; i < n; ++i) {
        const Index src = order[static_cast<size_t>(i)];
        Scalar lambda = raw_values(src);
        if (lambda < Scalar(0)) {
            if (lambda < -tolerance)
                throw Error(ErrorCode::NotPSD, "eigenvalue " + std::to_string(static_cast<double>(lambda)) +
                                                   " below -1e-10 * lambda_max");
            lambda = Scalar(0);
        }
        model.eigenvalues(i) = lambda;

        auto v = solver.eigenvectors().col(src);
        Index pivot = 0;
        for (Index j = 1; j < n; ++j)
            if (std::abs(v(j)) > std::abs(v(pivot))) pivot = j;
        model.eigenvectors.col(i) = v(pivot) < Scalar(0) ? Vector<Scalar>(-v) : Vector<Scalar>(v);
    }
    return model;
}

template <typename Scalar>
EigenModel<Scalar> eigendecompose(const SceneStats<Scalar>& stats) {
    return eigendecompose(stats.covariance);
}

/// Whitening transform on the leading `k` principal components:
/// column i of P scaled by 1/sqrt(lambda_i). Columns depend only on their own
/// eigenpair, so W_k is exactly the first k columns of any W_k' with k' > k.
template <typename Scalar, typename MeanDerived>
WhiteningModel<Scalar> whitening_matrix(const EigenModel<Scalar>& model, const Eigen::MatrixBase<MeanDerived>& mean,
                                        Index k) {
    if (mean.size() != model.bands())
        throw Error(ErrorCode::LengthMismatch, "mean length does not match the eigenmodel");
    if (k < 1) throw Error(ErrorCode::RankZero, "rank must be at least 1");
    const Index usable = model.usable_rank();
    if (usable == 0) throw Error(ErrorCode::RankZero, "covariance has no nonzero eigenvalues (constant scene)");
    if (k > usable)
        throw Error(ErrorCode::RankTooHigh,
                    "rank " + std::to_string(k) + " exceeds usable rank " + std::to_string(usable));

    WhiteningModel<Scalar> w;
    w.mean = mean;
    w.retained_eigenvalues = model.eigenvalues.head(k);
    w.transform.resize(model.bands(), k);
    for (Index i = 0; i < k; ++i)
        w.transform.col(i) = model.eigenvectors.col(i) * (Scalar(1) / std::sqrt(model.eigenvalues(i)));
    return w;
}

namespace detail {

// Shared per-pixel kernel so whiten() and whiten_cube() agree bit for bit.
template <typename Scalar, typename In, typename Out>
void whiten_into(const WhiteningModel<Scalar>& model, const In& spectrum, Out&& out) {
    const Index bands = model.bands();
    const Index k = model.rank();
    for (Index j = 0; j < k; ++j) {
        const Scalar* col = model.transform.col(j).data();
        Scalar sum(0);
        for (Index b = 0; b < bands; ++b) sum += col[b] * (spectrum(b) - model.mean(b));
        out(j) = sum;
    }
}

} // namespace detail

/// Projects one spectrum: W_k^T (a - mu).
template <typename Scalar, typename Derived>
Vector<Scalar> whiten(const WhiteningModel<Scalar>& model, const Eigen::MatrixBase<Derived>& spectrum) {
    if (spectrum.size() != model.bands())
        throw Error(ErrorCode::LengthMismatch, "spectrum has " + std::to_string(spectrum.size()) +
                                                   " bands, model expects " + std::to_string(model.bands()));
    Vector<Scalar> out(model.rank());
    detail::whiten_into(model, spectrum.derived(), out);
    return out;
}

/// Whitens every pixel of `cube`; pixels are independent so the output does
/// not depend on `threads`.
template <typename Scalar>
WhitenedCube<Scalar> whiten_cube(const WhiteningModel<Scalar>& model, const HyperCube& cube, unsigned threads = 0) {
    if (cube.bands() != model.bands())
        throw Error(ErrorCode::LengthMismatch, "cube has " + std::to_string(cube.bands()) +
                                                   " bands, model expects " + std::to_string(model.bands()));
    WhitenedCube<Scalar> out;
    out.lines = cube.lines();
    out.samples = cube.samples();
    out.data.resize(cube.pixel_count(), model.rank());
    const auto& px = cube.pixels();
    parallel_for(
        cube.pixel_count(),
        [&](Index begin, Index end) {
            for (Index p = begin; p < end; ++p) {
                auto row = out.data.row(p);
                detail::whiten_into(model, px.row(p).template cast<Scalar>(), row);
            }
        },
        threads);
    return out;
}

} // namespace hsd
