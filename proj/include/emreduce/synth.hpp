#ifndef EMREDUCE_SYNTH_HPP
#define EMREDUCE_SYNTH_HPP

#include <string>
#include <vector>

#include "core.hpp"
#include "quality.hpp"
#include "types.hpp"

namespace emreduce {

struct SynthSpec {
    int bands = 50;
    int true_endmembers = 5;
    int pixels = 2000;
    int pure_pixel_copies = 3;
    double noise_sigma = 0.0;
    double dirichlet_concentration = 1.0;
    double max_condition = 50.0;  // rejection bound on the true endmember matrix
    std::uint64_t seed = 0;

    void validate() const {
        if (bands < 1 || true_endmembers < 1 || pixels < 1 || pure_pixel_copies < 1)
            throw Error("SynthSpec: positive dimensions required");
        if (true_endmembers > bands) throw Error("SynthSpec: k <= bands required");
        if (pixels < true_endmembers * pure_pixel_copies)
            throw Error("SynthSpec: pixels >= k * pure_pixel_copies required");
        if (noise_sigma < 0.0) throw Error("SynthSpec: noise_sigma >= 0 required");
        if (!(dirichlet_concentration > 0.0))
            throw Error("SynthSpec: dirichlet_concentration > 0 required");
    }
};

struct SynthScene {
    SpectralImage image;
    EndmemberSet ground_truth;
    AbundanceMap abundances;
    std::vector<int> pure_pixel_indices;  // k * copies entries, endmember-major
};

// Linear mixture scene: k nonnegative spectra (rejected until the condition
// number stays under max_condition), Dirichlet abundances, pure pixels for
// every endmember at the front of the cube, plus Gaussian noise. Same seed,
// byte-identical scene.
inline SynthScene synthesize(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int n = spec.bands;
    const int k = spec.true_endmembers;
    const int p = spec.pixels;

    SynthScene scene;
    scene.ground_truth.label = "synthetic";
    scene.ground_truth.spectra.resize(n, k);
    bool accepted = false;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        for (int j = 0; j < k; ++j)
            for (int b = 0; b < n; ++b)
                scene.ground_truth.spectra(b, j) = rng.uniform();
        if (condition_number(scene.ground_truth.spectra) <= spec.max_condition) {
            accepted = true;
            break;
        }
    }
    if (!accepted)
        throw NumericalError("synthesize: no endmember draw met the condition bound in 1000 tries");
    for (int j = 0; j < k; ++j) {
        Provenance prov;
        prov.kind = ProvenanceKind::synthetic;
        prov.name = "truth" + std::to_string(j);
        scene.ground_truth.members.push_back(std::move(prov));
    }

    scene.abundances.mode = UnmixMode::fully_constrained;
    scene.abundances.solver_tolerance = 1e-12;
    scene.abundances.values.resize(k, p);
    int px = 0;
    for (int j = 0; j < k; ++j) {
        for (int c = 0; c < spec.pure_pixel_copies; ++c, ++px) {
            scene.abundances.values.col(px).setZero();
            scene.abundances.values(j, px) = 1.0;
            scene.pure_pixel_indices.push_back(px);
        }
    }
    for (; px < p; ++px) {
        double total = 0.0;
        for (int j = 0; j < k; ++j) {
            const double g = rng.gamma(spec.dirichlet_concentration);
            scene.abundances.values(j, px) = g;
            total += g;
        }
        scene.abundances.values.col(px) /= total;
    }

    scene.image.data = scene.ground_truth.spectra * scene.abundances.values;
    if (spec.noise_sigma > 0.0)
        for (int c = 0; c < p; ++c)
            for (int b = 0; b < n; ++b)
                scene.image.data(b, c) += spec.noise_sigma * rng.gaussian();

    scene.ground_truth.validate();
    scene.abundances.validate();
    scene.image.validate();
    return scene;
}

}  // namespace emreduce

#endif
