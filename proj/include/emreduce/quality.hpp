#ifndef EMREDUCE_QUALITY_HPP
#define EMREDUCE_QUALITY_HPP

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

#include "types.hpp"

namespace emreduce {

// kappa = sigma_max / sigma_min of the endmember matrix, by full SVD.
// Rank-deficient sets (sigma_min <= EPS_RANK * sigma_max) report KAPPA_CAP.
inline double condition_number(const Eigen::MatrixXd& endmember_matrix) {
    const auto n = endmember_matrix.rows();
    const auto m = endmember_matrix.cols();
    if (m < 1) throw DimensionError("condition_number: empty matrix");
    if (n < m) throw DimensionError("condition_number: need at least as many bands as endmembers");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(endmember_matrix);
    const double sigma_max = svd.singularValues()(0);
    const double sigma_min = svd.singularValues()(m - 1);
    if (sigma_min <= EPS_RANK * sigma_max) return KAPPA_CAP;
    return sigma_max / sigma_min;
}

inline double condition_number(const EndmemberSet& set) {
    return condition_number(set.spectra);
}

// Reconstruction residuum: ||E*A - I||_F / sqrt(n*p).
inline double rmse(const EndmemberSet& set, const AbundanceMap& abundances,
                   const SpectralImage& image) {
    if (set.bands() != image.bands())
        throw DimensionError("rmse: band count mismatch");
    if (abundances.endmembers() != set.size())
        throw DimensionError("rmse: abundance rows != endmember count");
    if (abundances.pixels() != image.pixels())
        throw DimensionError("rmse: abundance columns != pixel count");
    const double frob = (set.spectra * abundances.values - image.data).norm();
    return frob / std::sqrt(static_cast<double>(image.bands()) *
                            static_cast<double>(image.pixels()));
}

// Angle between two spectra in radians, clamped to [0, pi].
inline double spectral_angle(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw DimensionError("spectral_angle: length mismatch");
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) throw Error("spectral_angle: zero vector");
    double c = a.dot(b) / (na * nb);
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

}  // namespace emreduce

#endif
