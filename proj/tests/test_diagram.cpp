#include <doctest.h>

#include <fstream>
#include <sstream>

#include "emreduce/diagram.hpp"
#include "test_helpers.hpp"

using namespace emreduce;
using test_helpers::TempDir;

namespace {

TraceSummary sample_trace(double alpha, int m) {
    TraceSummary t;
    t.alpha = alpha;
    t.label = "osp";
    for (int size = m; size >= 1; --size)
        t.points.push_back({10.0 * size, 0.1 / size, size});
    return t;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// minimal XML well-formedness scan: tags balance and attributes are quoted
bool tags_balanced(const std::string& xml) {
    int depth = 0;
    std::size_t i = 0;
    while ((i = xml.find('<', i)) != std::string::npos) {
        const std::size_t end = xml.find('>', i);
        if (end == std::string::npos) return false;
        const std::string tag = xml.substr(i, end - i + 1);
        if (tag.rfind("<?", 0) == 0 || tag.rfind("<!--", 0) == 0) {
        } else if (tag.rfind("</", 0) == 0) {
            if (--depth < 0) return false;
        } else if (tag[tag.size() - 2] != '/') {
            ++depth;
        }
        i = end + 1;
    }
    return depth == 0;
}

}  // namespace

TEST_SUITE("diagram") {

TEST_CASE("one trace of length m-1 yields m labeled points") {
    const auto spec = build_diagram({sample_trace(0.5, 6)});
    CHECK(spec.points.size() == 6);
    for (const auto& pt : spec.points) {
        CHECK(pt.source == PointSource::trace);
        REQUIRE(pt.alpha.has_value());
        CHECK(*pt.alpha == 0.5);
        CHECK(pt.label.find("m=" + std::to_string(pt.quality.set_size)) != std::string::npos);
    }
}

TEST_CASE("the Pavia over-complete crop window excludes outside points") {
    std::vector<DiagramPoint> pts;
    auto mk = [&](double kappa, double r) {
        DiagramPoint pt;
        pt.quality = {kappa, r, 9};
        pt.source = PointSource::direct;
        pts.push_back(pt);
    };
    mk(1000.0, 0.06);  // inside
    mk(2400.0, 0.051); // inside
    mk(500.0, 0.06);   // kappa below window
    mk(1000.0, 0.08);  // rmse above window
    mk(3000.0, 0.06);  // kappa above window

    DiagramOptions opts;
    opts.crop = CropWindow{850.0, 2500.0, 0.05, 0.07};
    const auto spec = build_diagram({sample_trace(0.5, 2)}, pts, opts);
    int direct = 0;
    for (const auto& pt : spec.points)
        if (pt.source == PointSource::direct) ++direct;
    CHECK(direct == 2);
}

TEST_CASE("cropping is idempotent") {
    DiagramOptions opts;
    opts.crop = CropWindow{1.0, 100.0, 0.0, 1.0};
    const auto once = build_diagram({sample_trace(0.5, 8)}, {}, opts);
    std::vector<TraceSummary> rebuilt(1);
    rebuilt[0].alpha = 0.5;
    rebuilt[0].label = "osp";
    for (const auto& pt : once.points) rebuilt[0].points.push_back(pt.quality);
    const auto twice = build_diagram(rebuilt, {}, opts);
    CHECK(twice.points.size() == once.points.size());
}

TEST_CASE("duplicate identical points are retained with distinct run indices") {
    std::vector<DiagramPoint> pts;
    for (int run = 0; run < 3; ++run) {
        DiagramPoint pt;
        pt.quality = {5.0, 0.01, 4};
        pt.source = PointSource::direct;
        pt.run_index = run;
        pts.push_back(pt);
    }
    const auto spec = build_diagram({sample_trace(0, 2)}, pts);
    int direct = 0;
    for (const auto& pt : spec.points)
        if (pt.source == PointSource::direct) ++direct;
    CHECK(direct == 3);
}

TEST_CASE("empty diagram input is rejected") {
    CHECK_THROWS_AS(build_diagram({}), Error);
}

TEST_CASE("invalid crop window is rejected") {
    DiagramOptions opts;
    opts.crop = CropWindow{10.0, 10.0, 0.0, 1.0};
    CHECK_THROWS_AS(build_diagram({sample_trace(0, 2)}, {}, opts), Error);
}

TEST_CASE("CSV export round-trips exactly and orders rows by contract") {
    TempDir dir("diag_csv");
    std::vector<DiagramPoint> extra;
    DiagramPoint direct;
    direct.quality = {123.456789012345, 0.042, 5};
    direct.label = "direct five";
    direct.source = PointSource::direct;
    direct.run_index = 2;
    extra.push_back(direct);
    DiagramPoint brute;
    brute.quality = {KAPPA_CAP, 0.01, 4};  // degenerate -> written as inf
    brute.label = "subset 11";
    brute.source = PointSource::bruteforce;
    extra.push_back(brute);

    const auto spec = build_diagram({sample_trace(0.5, 3), sample_trace(0.0, 3)}, extra);
    export_csv(spec, dir / "d.csv");

    const std::string text = slurp(dir / "d.csv");
    CHECK(text.rfind("label,source,alpha,run_index,set_size,kappa,rmse\n", 0) == 0);
    CHECK(text.find(",inf,") != std::string::npos);

    // sorted by (source, alpha, size desc): all trace rows precede direct,
    // which precede bruteforce; alpha=0 trace before alpha=0.5
    const auto back = load_diagram_csv(dir / "d.csv");
    REQUIRE(back.size() == spec.points.size());
    std::size_t i = 0;
    for (int size = 3; size >= 1; --size, ++i) {
        CHECK(back[i].source == PointSource::trace);
        CHECK(*back[i].alpha == 0.0);
        CHECK(back[i].quality.set_size == size);
    }
    for (int size = 3; size >= 1; --size, ++i) {
        CHECK(*back[i].alpha == 0.5);
        CHECK(back[i].quality.set_size == size);
    }
    CHECK(back[i].source == PointSource::direct);
    CHECK(back[i].quality.kappa == 123.456789012345);  // 17-digit round-trip
    CHECK(*back[i].run_index == 2);
    ++i;
    CHECK(back[i].source == PointSource::bruteforce);
    CHECK(back[i].quality.kappa == KAPPA_CAP);
}

TEST_CASE("empty points still produce a header-only CSV") {
    TempDir dir("diag_hdr");
    DiagramSpec spec;  // not via build_diagram, which rejects empties
    export_csv(spec, dir / "d.csv");
    CHECK(slurp(dir / "d.csv") == "label,source,alpha,run_index,set_size,kappa,rmse\n");
    CHECK(load_diagram_csv(dir / "d.csv").empty());
}

TEST_CASE("SVG output is well-formed and contains one polyline per trace") {
    TempDir dir("diag_svg");
    std::vector<DiagramPoint> extra;
    DiagramPoint cap;
    cap.quality = {KAPPA_CAP, 0.2, 7};
    cap.source = PointSource::direct;
    extra.push_back(cap);
    const auto spec = build_diagram({sample_trace(0.0, 5), sample_trace(1.0, 5)}, extra);
    export_svg(spec, dir / "d.svg");
    const std::string svg = slurp(dir / "d.svg");

    CHECK(tags_balanced(svg));
    CHECK(svg.find("<svg") != std::string::npos);
    std::size_t polylines = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
        ++polylines;
        pos += 9;
    }
    CHECK(polylines == 2);

    // polyline vertex count equals trace point count
    const std::size_t first = svg.find("points=\"", svg.find("<polyline"));
    const std::size_t end = svg.find('"', first + 8);
    std::stringstream pts(svg.substr(first + 8, end - first - 8));
    std::string tok;
    int vertices = 0;
    while (pts >> tok) ++vertices;
    CHECK(vertices == 5);

    CHECK(svg.find("ideal") != std::string::npos);
}

TEST_CASE("log-scale x positions are ordered like kappa") {
    TempDir dir("diag_log");
    const auto spec = build_diagram({sample_trace(0.5, 6)});
    export_svg(spec, dir / "d.svg");
    const std::string svg = slurp(dir / "d.svg");
    const std::size_t first = svg.find("points=\"");
    const std::size_t end = svg.find('"', first + 8);
    std::stringstream pts(svg.substr(first + 8, end - first - 8));
    // trace points are emitted largest set (largest kappa) first
    double prev_x = 1e9;
    std::string pair;
    while (pts >> pair) {
        const double x = std::stod(pair.substr(0, pair.find(',')));
        CHECK(x < prev_x);
        prev_x = x;
    }
}

}  // TEST_SUITE
