#ifndef EMREDUCE_DIAGRAM_HPP
#define EMREDUCE_DIAGRAM_HPP

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "reduction.hpp"
#include "types.hpp"

namespace emreduce {

enum class PointSource { trace, direct, bruteforce, reference };

inline const char* to_string(PointSource s) {
    switch (s) {
        case PointSource::trace: return "trace";
        case PointSource::direct: return "direct";
        case PointSource::bruteforce: return "bruteforce";
        default: return "reference";
    }
}

inline PointSource point_source_from(const std::string& s) {
    if (s == "trace") return PointSource::trace;
    if (s == "direct") return PointSource::direct;
    if (s == "bruteforce") return PointSource::bruteforce;
    if (s == "reference") return PointSource::reference;
    throw IoError("unknown diagram point source '" + s + "'");
}

struct DiagramPoint {
    QualityPoint quality;
    std::string label;
    PointSource source = PointSource::direct;
    std::optional<double> alpha;     // present iff source == trace
    std::optional<int> run_index;
};

struct CropWindow {
    double kappa_min = 0.0, kappa_max = 0.0;
    double rmse_min = 0.0, rmse_max = 0.0;

    void validate() const {
        if (!(kappa_max > kappa_min) || !(rmse_max > rmse_min))
            throw Error("CropWindow: positive extent required on both axes");
    }
    bool contains(const QualityPoint& q) const {
        return q.kappa >= kappa_min && q.kappa <= kappa_max && q.rmse >= rmse_min &&
               q.rmse <= rmse_max;
    }
};

struct DiagramSpec {
    std::vector<DiagramPoint> points;
    std::optional<CropWindow> crop;
    bool kappa_log_scale = true;
    bool annotate_sizes = true;
};

struct DiagramOptions {
    std::optional<CropWindow> crop;
    bool kappa_log_scale = true;
    bool annotate_sizes = true;
};

// Merge reduction curves, direct extractions and brute-force clouds into one
// diagram; cropping drops points outside the window.
inline DiagramSpec build_diagram(const std::vector<TraceSummary>& traces,
                                 const std::vector<DiagramPoint>& extra_points = {},
                                 const DiagramOptions& options = {}) {
    if (options.crop) options.crop->validate();
    DiagramSpec spec;
    spec.crop = options.crop;
    spec.kappa_log_scale = options.kappa_log_scale;
    spec.annotate_sizes = options.annotate_sizes;

    int run = 0;
    for (const auto& trace : traces) {
        for (const auto& q : trace.points) {
            DiagramPoint pt;
            pt.quality = q;
            pt.label = trace.label.empty() ? "m=" + std::to_string(q.set_size)
                                           : trace.label + " m=" + std::to_string(q.set_size);
            pt.source = PointSource::trace;
            pt.alpha = trace.alpha;
            pt.run_index = run;
            spec.points.push_back(std::move(pt));
        }
        ++run;
    }
    for (const auto& pt : extra_points) spec.points.push_back(pt);
    if (spec.points.empty()) throw Error("build_diagram: no points");

    if (spec.crop) {
        auto outside = [&](const DiagramPoint& pt) { return !spec.crop->contains(pt.quality); };
        spec.points.erase(std::remove_if(spec.points.begin(), spec.points.end(), outside),
                          spec.points.end());
    }
    return spec;
}

namespace detail {

inline std::string kappa_text(double kappa) {
    if (kappa >= KAPPA_CAP) return "inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", kappa);
    return buf;
}

}  // namespace detail

// CSV schema: label,source,alpha,run_index,set_size,kappa,rmse; rows sorted
// by (source, alpha, set_size descending). kappa of KAPPA_CAP written "inf".
inline void export_csv(const DiagramSpec& diagram, const std::filesystem::path& path) {
    std::vector<DiagramPoint> rows = diagram.points;
    std::stable_sort(rows.begin(), rows.end(), [](const DiagramPoint& a, const DiagramPoint& b) {
        if (a.source != b.source) return static_cast<int>(a.source) < static_cast<int>(b.source);
        const double aa = a.alpha.value_or(-1.0);
        const double ba = b.alpha.value_or(-1.0);
        if (aa != ba) return aa < ba;
        return a.quality.set_size > b.quality.set_size;
    });
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    char buf[40];
    auto g17 = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "label,source,alpha,run_index,set_size,kappa,rmse\n";
    for (const auto& pt : rows) {
        std::string label = pt.label;
        std::replace(label.begin(), label.end(), ',', ';');
        out << label << ',' << to_string(pt.source) << ',';
        if (pt.alpha) out << g17(*pt.alpha);
        out << ',';
        if (pt.run_index) out << *pt.run_index;
        out << ',' << pt.quality.set_size << ',' << detail::kappa_text(pt.quality.kappa) << ','
            << g17(pt.quality.rmse) << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

inline std::vector<DiagramPoint> load_diagram_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line.rfind("label,", 0) != 0)
        throw IoError(path.string() + ": missing diagram CSV header");
    std::vector<DiagramPoint> points;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        fields.resize(7);
        DiagramPoint pt;
        pt.label = fields[0];
        pt.source = point_source_from(fields[1]);
        if (!fields[2].empty()) pt.alpha = std::stod(fields[2]);
        if (!fields[3].empty()) pt.run_index = std::stoi(fields[3]);
        pt.quality.set_size = std::stoi(fields[4]);
        pt.quality.kappa = fields[5] == "inf" ? KAPPA_CAP : std::stod(fields[5]);
        pt.quality.rmse = std::stod(fields[6]);
        points.push_back(std::move(pt));
    }
    return points;
}

// Self-contained SVG: kappa on x (log10 by default), RMSE on y, one polyline
// per (alpha, run) trace, scatter glyphs per source, the ideal point at
// (1, 0). Fixed 800x600 viewbox with 60px margins so snapshots are stable.
inline void export_svg(const DiagramSpec& diagram, const std::filesystem::path& path) {
    constexpr double kWidth = 800.0, kHeight = 600.0, kMargin = 60.0;

    double kappa_lo = 1.0, kappa_hi = 10.0, rmse_hi = 1e-3;
    bool any_finite = false;
    for (const auto& pt : diagram.points) {
        if (!rank_deficient(pt.quality.kappa)) {
            kappa_hi = any_finite ? std::max(kappa_hi, pt.quality.kappa) : pt.quality.kappa;
            any_finite = true;
        }
        rmse_hi = std::max(rmse_hi, pt.quality.rmse);
    }
    kappa_hi = std::max(kappa_hi * 1.05, 10.0);
    rmse_hi *= 1.05;

    auto x_of = [&](double kappa) {
        const bool cap = rank_deficient(kappa);
        double t;
        if (diagram.kappa_log_scale) {
            const double lo = std::log10(kappa_lo), hi = std::log10(kappa_hi);
            t = cap ? 1.0 : (std::log10(std::max(kappa, kappa_lo)) - lo) / (hi - lo);
        } else {
            t = cap ? 1.0 : (kappa - kappa_lo) / (kappa_hi - kappa_lo);
        }
        t = std::clamp(t, 0.0, 1.0);
        return kMargin + t * (kWidth - 2.0 * kMargin);
    };
    auto y_of = [&](double r) {
        const double t = std::clamp(r / rmse_hi, 0.0, 1.0);
        return kHeight - kMargin - t * (kHeight - 2.0 * kMargin);
    };

    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return std::string(buf);
    };

    out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
           "viewBox=\"0 0 800 600\" width=\"800\" height=\"600\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n"
        << "<line x1=\"60\" y1=\"540\" x2=\"740\" y2=\"540\" stroke=\"black\"/>\n"
        << "<line x1=\"60\" y1=\"60\" x2=\"60\" y2=\"540\" stroke=\"black\"/>\n"
        << "<text x=\"400\" y=\"580\" text-anchor=\"middle\" font-size=\"14\">condition number"
        << (diagram.kappa_log_scale ? " (log scale)" : "") << "</text>\n"
        << "<text x=\"20\" y=\"300\" text-anchor=\"middle\" font-size=\"14\" "
           "transform=\"rotate(-90 20 300)\">RMSE</text>\n";

    // ideal point marker at (kappa=1, rmse=0)
    out << "<circle cx=\"" << num(x_of(1.0)) << "\" cy=\"" << num(y_of(0.0))
        << "\" r=\"5\" fill=\"none\" stroke=\"green\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << num(x_of(1.0) + 8) << "\" y=\"" << num(y_of(0.0) - 8)
        << "\" font-size=\"11\" fill=\"green\">ideal</text>\n";

    static const char* kTraceColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                         "#ff7f0e", "#8c564b"};

    // polylines: trace points grouped by (alpha, run_index)
    std::map<std::pair<double, int>, std::vector<const DiagramPoint*>> curves;
    for (const auto& pt : diagram.points)
        if (pt.source == PointSource::trace)
            curves[{pt.alpha.value_or(0.0), pt.run_index.value_or(0)}].push_back(&pt);

    int color = 0;
    for (auto& [key, pts] : curves) {
        std::stable_sort(pts.begin(), pts.end(), [](const DiagramPoint* a, const DiagramPoint* b) {
            return a->quality.set_size > b->quality.set_size;
        });
        const char* c = kTraceColors[color % 6];
        out << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
        for (const auto* pt : pts)
            out << num(x_of(pt->quality.kappa)) << ',' << num(y_of(pt->quality.rmse)) << ' ';
        out << "\"/>\n";
        for (const auto* pt : pts) {
            const bool cap = rank_deficient(pt->quality.kappa);
            if (cap)  // degenerate sets sit on the right edge with a cross glyph
                out << "<path d=\"M " << num(x_of(pt->quality.kappa) - 4) << ' '
                    << num(y_of(pt->quality.rmse) - 4) << " l 8 8 m 0 -8 l -8 8\" stroke=\"" << c
                    << "\" stroke-width=\"1.5\"/>\n";
            else
                out << "<circle cx=\"" << num(x_of(pt->quality.kappa)) << "\" cy=\""
                    << num(y_of(pt->quality.rmse)) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
            if (diagram.annotate_sizes)
                out << "<text x=\"" << num(x_of(pt->quality.kappa) + 4) << "\" y=\""
                    << num(y_of(pt->quality.rmse) - 4) << "\" font-size=\"9\" fill=\"" << c
                    << "\">" << pt->quality.set_size << "</text>\n";
        }
        out << "<text x=\"" << num(kWidth - kMargin - 120) << "\" y=\""
            << num(kMargin + 14.0 * (color + 1)) << "\" font-size=\"11\" fill=\"" << c
            << "\">alpha=" << key.first << " run " << key.second << "</text>\n";
        ++color;
    }

    for (const auto& pt : diagram.points) {
        if (pt.source == PointSource::trace) continue;
        const double x = x_of(pt.quality.kappa);
        const double y = y_of(pt.quality.rmse);
        if (rank_deficient(pt.quality.kappa)) {
            out << "<path d=\"M " << num(x - 4) << ' ' << num(y - 4)
                << " l 8 8 m 0 -8 l -8 8\" stroke=\"black\" stroke-width=\"1\"/>\n";
            continue;
        }
        switch (pt.source) {
            case PointSource::direct:
                out << "<rect x=\"" << num(x - 3) << "\" y=\"" << num(y - 3)
                    << "\" width=\"6\" height=\"6\" fill=\"none\" stroke=\"black\"/>\n";
                break;
            case PointSource::bruteforce:
                out << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y)
                    << "\" r=\"1.5\" fill=\"#999999\"/>\n";
                break;
            default:
                out << "<path d=\"M " << num(x) << ' ' << num(y - 4)
                    << " l 4 8 l -8 0 z\" fill=\"orange\"/>\n";
                break;
        }
    }

    out << "<text x=\"680\" y=\"52\" font-size=\"11\">direct &#9633;  brute &#183;</text>\n";
    out << "</svg>\n";
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace emreduce

#endif
