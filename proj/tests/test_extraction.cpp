#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <set>

#include "emreduce/extraction.hpp"
#include "emreduce/synth.hpp"
#include "test_helpers.hpp"

using namespace emreduce;
using test_helpers::image_from_matrix;
using test_helpers::random_matrix;

namespace {

// k mutually orthogonal vectors with distinct large norms, each repeated,
// plus small mixed pixels
SpectralImage orthogonal_scene(int bands, int k, int copies) {
    Eigen::MatrixXd data = Eigen::MatrixXd::Zero(bands, k * copies + 10);
    int px = 0;
    for (int j = 0; j < k; ++j)
        for (int c = 0; c < copies; ++c) data(j, px++) = 5.0 + j;
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < k; ++j) data(j, px + i) = 0.1 + 0.01 * j + 0.02 * i;
    return image_from_matrix(data);
}

std::set<int> pixel_indices(const EndmemberSet& set) {
    std::set<int> out;
    for (const auto& m : set.members) {
        REQUIRE(m.kind == ProvenanceKind::pixel);
        out.insert(*m.pixel_index);
    }
    return out;
}

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("OSP recovers all distinct orthogonal vectors") {
    const int k = 4, copies = 3;
    const SpectralImage img = orthogonal_scene(8, k, copies);
    ExtractionConfig cfg;
    cfg.target_size = k;
    const EndmemberSet set = extract_osp(img, cfg);

    // oracle: recompute each greedy step with explicit projectors
    std::vector<int> expected;
    Eigen::MatrixXd picked(8, k);
    for (int step = 0; step < k; ++step) {
        int best = -1;
        double best_score = -1.0;
        for (int px = 0; px < img.pixels(); ++px) {
            Eigen::VectorXd r = img.data.col(px);
            if (step > 0) {
                const Eigen::MatrixXd e = picked.leftCols(step);
                r -= e * (e.transpose() * e).ldlt().solve(e.transpose() * r);
            }
            if (r.squaredNorm() > best_score + 1e-12) {
                best_score = r.squaredNorm();
                best = px;
            }
        }
        picked.col(step) = img.data.col(best);
        expected.push_back(best);
    }
    for (int j = 0; j < k; ++j) CHECK(*set.members[j].pixel_index == expected[j]);

    // all k distinct directions found (one pixel per orthogonal group)
    std::set<int> groups;
    for (int idx : pixel_indices(set)) groups.insert(idx / copies);
    CHECK(static_cast<int>(groups.size()) == k);
}

TEST_CASE("OSP with target 1 picks the maximum-norm pixel") {
    const SpectralImage img = orthogonal_scene(6, 3, 2);
    ExtractionConfig cfg;
    cfg.target_size = 1;
    const EndmemberSet set = extract_osp(img, cfg);
    int expected = 0;
    for (int px = 1; px < img.pixels(); ++px)
        if (img.data.col(px).norm() > img.data.col(expected).norm()) expected = px;
    CHECK(*set.members[0].pixel_index == expected);
}

TEST_CASE("OSP ties break to the lowest pixel index and repeat runs agree") {
    // two identical max-norm pixels
    Eigen::MatrixXd data = Eigen::MatrixXd::Zero(4, 5);
    data(0, 1) = 3.0;
    data(0, 3) = 3.0;
    data(1, 0) = 1.0;
    data(2, 2) = 2.0;
    const auto img = image_from_matrix(data);
    ExtractionConfig cfg;
    cfg.target_size = 2;
    const EndmemberSet a = extract_osp(img, cfg);
    const EndmemberSet b = extract_osp(img, cfg);
    CHECK(*a.members[0].pixel_index == 1);  // not 3
    CHECK(*a.members[0].pixel_index == *b.members[0].pixel_index);
    CHECK(*a.members[1].pixel_index == *b.members[1].pixel_index);
}

TEST_CASE("OSP rank collapse raises a numerical error") {
    // rank-1 data cannot yield a second endmember
    Eigen::MatrixXd data(3, 4);
    for (int px = 0; px < 4; ++px) data.col(px) = (px + 1.0) * Eigen::Vector3d(1, 2, 3);
    ExtractionConfig cfg;
    cfg.target_size = 2;
    CHECK_THROWS_AS(extract_osp(image_from_matrix(data), cfg), NumericalError);
}

TEST_CASE("OSP is invariant to pixel permutation up to provenance re-indexing") {
    const SpectralImage img = orthogonal_scene(8, 3, 2);
    const int p = img.pixels();
    std::vector<int> perm(static_cast<std::size_t>(p));
    for (int i = 0; i < p; ++i) perm[static_cast<std::size_t>(i)] = (i * 7 + 3) % p;
    Eigen::MatrixXd shuffled(img.bands(), p);
    for (int i = 0; i < p; ++i) shuffled.col(perm[static_cast<std::size_t>(i)]) = img.data.col(i);

    ExtractionConfig cfg;
    cfg.target_size = 3;
    const EndmemberSet a = extract_osp(img, cfg);
    const EndmemberSet b = extract_osp(image_from_matrix(shuffled), cfg);
    // tie groups of identical pixels may resolve to a different copy after the
    // shuffle, so compare the picked spectra rather than raw indices
    for (int j = 0; j < 3; ++j) {
        CHECK(a.spectra.col(j) == b.spectra.col(j));
        CHECK(shuffled.col(*b.members[j].pixel_index) ==
              img.data.col(*a.members[j].pixel_index));
    }
}

TEST_CASE("N-FINDR finds the vertices of a triangle") {
    // triangle vertices in a 2-plane of band space plus interior points
    Eigen::MatrixXd verts(4, 3);
    verts << 1, 0, 0,
             0, 1, 0,
             0, 0, 1,
             1, 1, 1;
    Eigen::MatrixXd data(4, 20);
    data.col(0) = verts.col(0);
    data.col(7) = verts.col(1);
    data.col(13) = verts.col(2);
    std::mt19937 mix(42);
    std::uniform_real_distribution<double> dist(0.05, 0.95);
    int slot = 0;
    for (int px = 0; px < 20; ++px) {
        if (px == 0 || px == 7 || px == 13) continue;
        double w0 = dist(mix), w1 = dist(mix), w2 = dist(mix);
        const double s = w0 + w1 + w2;
        data.col(px) = (w0 * verts.col(0) + w1 * verts.col(1) + w2 * verts.col(2)) / s;
        ++slot;
    }
    const auto img = image_from_matrix(data);

    ExtractionConfig cfg;
    cfg.target_size = 3;
    cfg.seed = 11;
    const EndmemberSet set = extract_nfindr(img, cfg);
    CHECK(pixel_indices(set) == std::set<int>{0, 7, 13});

    // oracle: exhaustive volume over all pixel triples in the PCA plane
    const Eigen::VectorXd mean = data.rowwise().mean();
    const Eigen::MatrixXd centered = data.colwise() - mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered * centered.transpose());
    Eigen::MatrixXd w(4, 2);
    w.col(0) = es.eigenvectors().col(3);
    w.col(1) = es.eigenvectors().col(2);
    const Eigen::MatrixXd reduced = w.transpose() * centered;
    double best_vol = -1.0;
    std::set<int> best_triple;
    for (int a = 0; a < 20; ++a)
        for (int b = a + 1; b < 20; ++b)
            for (int c = b + 1; c < 20; ++c) {
                Eigen::Matrix3d m;
                m << 1, 1, 1, reduced(0, a), reduced(0, b), reduced(0, c), reduced(1, a),
                    reduced(1, b), reduced(1, c);
                const double vol = std::abs(m.determinant());
                if (vol > best_vol) {
                    best_vol = vol;
                    best_triple = {a, b, c};
                }
            }
    CHECK(best_triple == std::set<int>{0, 7, 13});
}

TEST_CASE("N-FINDR on collinear data reports degenerate initialization") {
    Eigen::MatrixXd data(3, 10);
    for (int px = 0; px < 10; ++px) data.col(px) = px * Eigen::Vector3d(1, 1, 2);
    data.col(0) = Eigen::Vector3d(0.1, 0.1, 0.2);  // avoid the zero column
    ExtractionConfig cfg;
    cfg.target_size = 3;
    CHECK_THROWS_AS(extract_nfindr(image_from_matrix(data), cfg), NumericalError);
}

TEST_CASE("N-FINDR converges to the same member set from different seeds") {
    SynthSpec spec;
    spec.bands = 12;
    spec.true_endmembers = 3;
    spec.pixels = 120;
    spec.seed = 5;
    spec.noise_sigma = 0.0;
    const SynthScene scene = synthesize(spec);

    ExtractionConfig cfg;
    cfg.target_size = 3;
    cfg.nfindr_max_sweeps = 20;
    // pure pixels come in identical copies (endmember-major at the front of
    // the scene), so different seeds may settle on different copies of the
    // same vertex; compare the vertex each pick represents, not raw indices
    auto vertex_groups = [&](const EndmemberSet& set) {
        std::set<int> groups;
        for (const auto& member : set.members) {
            const int px = *member.pixel_index;
            groups.insert(px < 3 * spec.pure_pixel_copies ? px / spec.pure_pixel_copies
                                                          : 1000 + px);
        }
        return groups;
    };
    cfg.seed = 101;
    const auto a = vertex_groups(extract_nfindr(scene.image, cfg));
    cfg.seed = 999;
    const auto b = vertex_groups(extract_nfindr(scene.image, cfg));
    CHECK(a == b);
    CHECK(a == std::set<int>{0, 1, 2});  // the three true vertices
}

TEST_CASE("N-FINDR same seed gives identical output") {
    SynthSpec spec;
    spec.bands = 10;
    spec.true_endmembers = 4;
    spec.pixels = 80;
    spec.seed = 9;
    const SynthScene scene = synthesize(spec);
    ExtractionConfig cfg;
    cfg.target_size = 4;
    cfg.seed = 77;
    const EndmemberSet a = extract_nfindr(scene.image, cfg);
    const EndmemberSet b = extract_nfindr(scene.image, cfg);
    CHECK(a.spectra == b.spectra);
    for (int j = 0; j < 4; ++j) CHECK(*a.members[j].pixel_index == *b.members[j].pixel_index);
}

TEST_CASE("VCA selects the pure pixels for every seed in a 10-seed sweep") {
    const int k = 3, copies = 2;
    const SpectralImage img = orthogonal_scene(10, k, copies);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        ExtractionConfig cfg;
        cfg.target_size = k;
        cfg.seed = seed;
        const EndmemberSet set = extract_vca(img, cfg);
        std::set<int> groups;
        for (int idx : pixel_indices(set)) {
            CHECK(idx < k * copies);  // a pure pixel, not a mixture
            groups.insert(idx / copies);
        }
        CAPTURE(seed);
        CHECK(static_cast<int>(groups.size()) == k);
    }
}

TEST_CASE("VCA with target 1 picks the extreme pixel along the first direction") {
    const SpectralImage img = orthogonal_scene(6, 2, 2);
    ExtractionConfig cfg;
    cfg.target_size = 1;
    cfg.seed = 3;
    const EndmemberSet set = extract_vca(img, cfg);
    CHECK(set.size() == 1);
    CHECK(set.members[0].kind == ProvenanceKind::pixel);
}

TEST_CASE("VCA fixed seed is bit-identical across runs") {
    SynthSpec spec;
    spec.bands = 15;
    spec.true_endmembers = 4;
    spec.pixels = 100;
    spec.seed = 21;
    const SynthScene scene = synthesize(spec);
    ExtractionConfig cfg;
    cfg.target_size = 4;
    cfg.seed = 5;
    const EndmemberSet a = extract_vca(scene.image, cfg);
    const EndmemberSet b = extract_vca(scene.image, cfg);
    CHECK(a.spectra == b.spectra);
    for (int j = 0; j < 4; ++j) CHECK(*a.members[j].pixel_index == *b.members[j].pixel_index);
}

TEST_CASE("all extractors return actual pixels without duplicates") {
    SynthSpec spec;
    spec.bands = 20;
    spec.true_endmembers = 5;
    spec.pixels = 200;
    spec.noise_sigma = 1e-3;
    spec.seed = 31;
    const SynthScene scene = synthesize(spec);
    for (auto algo : {Extractor::osp, Extractor::nfindr, Extractor::vca}) {
        ExtractionConfig cfg;
        cfg.target_size = 6;
        cfg.seed = 13;
        const EndmemberSet set = extract(algo, scene.image, cfg);
        const auto indices = pixel_indices(set);
        CHECK(static_cast<int>(indices.size()) == 6);  // distinct
        for (int j = 0; j < set.size(); ++j)
            CHECK(set.spectra.col(j) == scene.image.data.col(*set.members[j].pixel_index));
    }
}

TEST_CASE("target_size larger than the image is rejected") {
    const auto img = image_from_matrix(random_matrix(4, 3, 1));
    ExtractionConfig cfg;
    cfg.target_size = 5;
    CHECK_THROWS_AS(extract_osp(img, cfg), Error);
}

}  // TEST_SUITE
