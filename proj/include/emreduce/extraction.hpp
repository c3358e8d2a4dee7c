#ifndef EMREDUCE_EXTRACTION_HPP
#define EMREDUCE_EXTRACTION_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <string>
#include <vector>

#include "core.hpp"
#include "types.hpp"

namespace emreduce {

struct ExtractionConfig {
    int target_size = 1;
    std::uint64_t seed = 0;
    int nfindr_max_sweeps = 10;
    bool vca_snr_projection = false;

    void check(const SpectralImage& image) const {
        if (target_size < 1) throw Error("ExtractionConfig: target_size >= 1 required");
        if (target_size > std::min(image.bands(), image.pixels()))
            throw Error("ExtractionConfig: target_size exceeds min(bands, pixels)");
    }
};

namespace detail {

inline EndmemberSet set_from_pixels(const SpectralImage& image,
                                    const std::vector<int>& indices,
                                    const std::string& label) {
    EndmemberSet set;
    set.label = label;
    set.spectra.resize(image.bands(), static_cast<int>(indices.size()));
    for (std::size_t j = 0; j < indices.size(); ++j) {
        set.spectra.col(static_cast<int>(j)) = image.data.col(indices[j]);
        Provenance prov;
        prov.kind = ProvenanceKind::pixel;
        prov.pixel_index = indices[j];
        prov.name = "px" + std::to_string(indices[j]);
        set.members.push_back(std::move(prov));
    }
    set.validate();
    return set;
}

// argmax over pixels with lowest-index tie-break; deterministic regardless
// of how `score` was filled
inline int argmax_index(const Eigen::VectorXd& score) {
    int best = 0;
    for (int i = 1; i < score.size(); ++i)
        if (score(i) > score(best)) best = i;
    return best;
}

// top-k eigenvectors of the symmetric matrix C, descending eigenvalue
inline Eigen::MatrixXd top_eigenvectors(const Eigen::MatrixXd& c, int k) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c);
    const int n = static_cast<int>(c.rows());
    Eigen::MatrixXd w(n, k);
    for (int j = 0; j < k; ++j) {
        Eigen::VectorXd v = es.eigenvectors().col(n - 1 - j);
        // fix sign: largest-magnitude component positive
        int imax = 0;
        for (int i = 1; i < n; ++i)
            if (std::abs(v(i)) > std::abs(v(imax))) imax = i;
        if (v(imax) < 0) v = -v;
        w.col(j) = v;
    }
    return w;
}

}  // namespace detail

// Orthogonal subspace projection: repeatedly pick the pixel with the largest
// residual against the span of the current set. Deterministic.
inline EndmemberSet extract_osp(const SpectralImage& image, const ExtractionConfig& config) {
    image.validate();
    config.check(image);
    const int p = image.pixels();

    std::vector<int> picked;
    Eigen::MatrixXd basis(image.bands(), config.target_size);  // orthonormal span
    Eigen::VectorXd score(p);

    for (int step = 0; step < config.target_size; ++step) {
        const auto span = basis.leftCols(step);
        parallel_for(p, [&](std::int64_t px) {
            Eigen::VectorXd r = image.data.col(px);
            if (step > 0) r -= span * (span.transpose() * r);
            score(px) = r.squaredNorm();
        });
        const int best = detail::argmax_index(score);
        Eigen::VectorXd r = image.data.col(best);
        if (step > 0) r -= span * (span.transpose() * r);
        const double rn = r.norm();
        if (rn <= EPS_RANK * std::max(1.0, image.data.col(best).norm()))
            throw NumericalError("extract_osp: rank collapse at step " + std::to_string(step));
        basis.col(step) = r / rn;
        picked.push_back(best);
    }
    return detail::set_from_pixels(image, picked, "osp");
}

// N-FINDR: maximize simplex volume in the (m-1)-dimensional principal
// subspace of the mean-centered data. Seeded random initialization, full
// replacement sweeps until a sweep changes nothing.
inline EndmemberSet extract_nfindr(const SpectralImage& image, const ExtractionConfig& config) {
    image.validate();
    config.check(image);
    const int m = config.target_size;
    if (m < 2) throw Error("extract_nfindr: target_size >= 2 required");
    const int p = image.pixels();

    const Eigen::VectorXd mean = image.data.rowwise().mean();
    const Eigen::MatrixXd centered = image.data.colwise() - mean;
    const Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(p);
    const Eigen::MatrixXd w = detail::top_eigenvectors(cov, m - 1);
    const Eigen::MatrixXd reduced = w.transpose() * centered;  // (m-1) x p

    // volume of the simplex spanned by the chosen pixels, up to a constant
    Eigen::MatrixXd vol_mat(m, m);
    auto volume = [&](const std::vector<int>& idx) {
        for (int j = 0; j < m; ++j) {
            vol_mat(0, j) = 1.0;
            vol_mat.block(1, j, m - 1, 1) = reduced.col(idx[j]);
        }
        return std::abs(vol_mat.partialPivLu().determinant());
    };

    Rng rng(config.seed);
    std::vector<int> vertices;
    double vol = 0.0;
    const double degenerate = 1e-12;
    for (int attempt = 0; attempt < 100; ++attempt) {
        vertices.clear();
        while (static_cast<int>(vertices.size()) < m) {
            const int candidate = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p)));
            if (std::find(vertices.begin(), vertices.end(), candidate) == vertices.end())
                vertices.push_back(candidate);
        }
        vol = volume(vertices);
        if (vol > degenerate) break;
    }
    if (vol <= degenerate)
        throw NumericalError("extract_nfindr: degenerate initialization (zero volume)");

    std::vector<int> trial = vertices;
    for (int sweep = 0; sweep < config.nfindr_max_sweeps; ++sweep) {
        bool changed = false;
        for (int j = 0; j < m; ++j) {
            for (int px = 0; px < p; ++px) {
                if (std::find(vertices.begin(), vertices.end(), px) != vertices.end()) continue;
                trial = vertices;
                trial[j] = px;
                const double v = volume(trial);
                if (v > vol) {
                    vol = v;
                    vertices = trial;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return detail::set_from_pixels(image, vertices, "nfindr");
}

// VCA-style projective scheme: project onto the k-dimensional principal
// subspace, then repeatedly pick the pixel with maximal absolute projection
// onto a seeded random direction orthogonal to the current picks.
inline EndmemberSet extract_vca(const SpectralImage& image, const ExtractionConfig& config) {
    image.validate();
    config.check(image);
    const int k = config.target_size;
    const int p = image.pixels();

    // signal subspace: principal components of the raw data; the
    // SNR-projection variant centers the data first
    Eigen::MatrixXd source = image.data;
    if (config.vca_snr_projection) {
        const Eigen::VectorXd mean = source.rowwise().mean();
        source = source.colwise() - mean;
    }
    const Eigen::MatrixXd cov = source * source.transpose() / static_cast<double>(p);
    const Eigen::MatrixXd w = detail::top_eigenvectors(cov, k);
    const Eigen::MatrixXd reduced = w.transpose() * source;  // k x p

    Rng rng(config.seed);
    std::vector<int> picked;
    std::vector<char> taken(static_cast<std::size_t>(p), 0);
    Eigen::MatrixXd span(k, k);  // orthonormal basis of picked directions

    for (int step = 0; step < k; ++step) {
        Eigen::VectorXd dir(k);
        double dn = 0.0;
        for (int attempt = 0; attempt < 100; ++attempt) {
            for (int i = 0; i < k; ++i) dir(i) = rng.gaussian();
            if (step > 0) {
                const auto q = span.leftCols(step);
                dir -= q * (q.transpose() * dir);
            }
            dn = dir.norm();
            if (dn > 1e-9) break;
        }
        if (dn <= 1e-9)
            throw NumericalError("extract_vca: rank collapse at step " + std::to_string(step));
        dir /= dn;

        int best = -1;
        double best_score = -1.0;
        for (int px = 0; px < p; ++px) {
            if (taken[px]) continue;
            const double s = std::abs(dir.dot(reduced.col(px)));
            if (s > best_score) {
                best_score = s;
                best = px;
            }
        }
        if (best < 0) throw NumericalError("extract_vca: no candidate pixels left");
        picked.push_back(best);
        taken[best] = 1;

        // grow orthonormal span with the new pick's direction
        Eigen::VectorXd v = reduced.col(best);
        if (step > 0) {
            const auto q = span.leftCols(step);
            v -= q * (q.transpose() * v);
        }
        const double vn = v.norm();
        if (vn <= EPS_RANK * std::max(1.0, reduced.col(best).norm()))
            throw NumericalError("extract_vca: rank collapse at step " + std::to_string(step));
        span.col(step) = v / vn;
    }
    return detail::set_from_pixels(image, picked, "vca");
}

enum class Extractor { osp, nfindr, vca };

inline EndmemberSet extract(Extractor algo, const SpectralImage& image,
                            const ExtractionConfig& config) {
    switch (algo) {
        case Extractor::osp: return extract_osp(image, config);
        case Extractor::nfindr: return extract_nfindr(image, config);
        default: return extract_vca(image, config);
    }
}

inline bool extractor_deterministic(Extractor algo) { return algo == Extractor::osp; }

}  // namespace emreduce

#endif
