#ifndef EMREDUCE_TYPES_HPP
#define EMREDUCE_TYPES_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"

namespace emreduce {

// Hyperspectral cube: one column per pixel, one row per band.
struct SpectralImage {
    Eigen::MatrixXd data;  // bands x pixels
    std::optional<int> width;
    std::optional<int> height;
    std::optional<std::vector<double>> band_centers;  // nanometers

    int bands() const { return static_cast<int>(data.rows()); }
    int pixels() const { return static_cast<int>(data.cols()); }

    void validate() const {
        if (data.rows() < 1 || data.cols() < 1)
            throw DimensionError("SpectralImage: empty data");
        if (!data.allFinite())
            throw Error("SpectralImage: non-finite values");
        if (width.has_value() != height.has_value())
            throw Error("SpectralImage: width/height must be present together");
        if (width && static_cast<long long>(*width) * *height != pixels())
            throw Error("SpectralImage: width*height != pixels");
        if (band_centers && static_cast<int>(band_centers->size()) != bands())
            throw Error("SpectralImage: band_centers length != bands");
    }
};

enum class ProvenanceKind { pixel, synthetic, file };

struct Provenance {
    ProvenanceKind kind = ProvenanceKind::file;
    std::optional<int> pixel_index;  // present iff kind == pixel
    std::string name;
};

// Ordered endmember set; column i of `spectra` belongs to members[i].
struct EndmemberSet {
    Eigen::MatrixXd spectra;  // bands x m
    std::vector<Provenance> members;
    std::string label;

    int bands() const { return static_cast<int>(spectra.rows()); }
    int size() const { return static_cast<int>(spectra.cols()); }

    void validate() const {
        if (size() < 1) throw DimensionError("EndmemberSet: m >= 1 required");
        if (static_cast<int>(members.size()) != size())
            throw Error("EndmemberSet: members/spectra size mismatch");
        for (int j = 0; j < size(); ++j) {
            if (spectra.col(j).isZero(0.0))
                throw Error("EndmemberSet: all-zero endmember column " + std::to_string(j));
            const bool has_index = members[j].pixel_index.has_value();
            if ((members[j].kind == ProvenanceKind::pixel) != has_index)
                throw Error("EndmemberSet: pixel_index present iff kind == pixel");
        }
    }

    // Set with column `drop` removed; label untouched.
    EndmemberSet without(int drop) const {
        EndmemberSet out;
        out.label = label;
        out.spectra.resize(bands(), size() - 1);
        out.members.reserve(members.size() - 1);
        int k = 0;
        for (int j = 0; j < size(); ++j) {
            if (j == drop) continue;
            out.spectra.col(k++) = spectra.col(j);
            out.members.push_back(members[j]);
        }
        return out;
    }
};

enum class UnmixMode { fully_constrained, unconstrained };

struct AbundanceMap {
    Eigen::MatrixXd values;  // m x pixels
    UnmixMode mode = UnmixMode::fully_constrained;
    double solver_tolerance = 1e-9;

    int endmembers() const { return static_cast<int>(values.rows()); }
    int pixels() const { return static_cast<int>(values.cols()); }

    void validate() const {
        if (values.rows() < 1 || values.cols() < 1)
            throw DimensionError("AbundanceMap: empty");
        if (mode == UnmixMode::fully_constrained) {
            if (values.minCoeff() < -solver_tolerance)
                throw Error("AbundanceMap: negative abundance beyond tolerance");
            for (int px = 0; px < pixels(); ++px) {
                const double s = values.col(px).sum();
                if (s < 1.0 - 10.0 * solver_tolerance || s > 1.0 + 10.0 * solver_tolerance)
                    throw Error("AbundanceMap: column sum off one at pixel " + std::to_string(px));
            }
        }
    }
};

// One point of the condition-residuum diagram. kappa == KAPPA_CAP marks a
// rank-deficient set.
struct QualityPoint {
    double kappa = 1.0;
    double rmse = 0.0;
    int set_size = 1;
};

inline bool rank_deficient(double kappa) { return kappa >= KAPPA_CAP; }

}  // namespace emreduce

#endif
