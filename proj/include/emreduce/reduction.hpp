#ifndef EMREDUCE_REDUCTION_HPP
#define EMREDUCE_REDUCTION_HPP

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "quality.hpp"
#include "types.hpp"
#include "unmixing.hpp"

namespace emreduce {

struct ReductionConfig {
    double alpha = 0.5;  // 0 = pure condition number, 1 = pure RMSE
    SolverConfig solver;
    double eps_rmse = 1e-12;

    void validate() const {
        if (alpha < 0.0 || alpha > 1.0) throw Error("ReductionConfig: alpha must be in [0,1]");
        solver.validate();
    }
};

// kappa and RMSE of a set against an image, via one unmixing.
inline QualityPoint measure_quality(const EndmemberSet& set, const SpectralImage& image,
                                    const SolverConfig& solver = {}) {
    QualityPoint q;
    q.set_size = set.size();
    q.kappa = condition_number(set);
    const AbundanceMap a = unmix(set, image, solver);
    q.rmse = rmse(set, a, image);
    return q;
}

struct CandidateScore {
    int column = 0;           // column index into the parent set
    Provenance member;
    double kappa_after = 0.0;
    double rmse_after = 0.0;
    double kappa_term = 0.0;  // (kappa(S) - kappa(S\e)) / kappa(S)
    double rmse_term = 0.0;   // (rmse(S) - rmse(S\e)) / rmse(S), 0 when rmse(S) ~ 0
    double score = 0.0;       // (1-alpha)*kappa_term + alpha*rmse_term
};

struct ReductionStep {
    int removed_column = 0;
    Provenance removed;
    double score = 0.0;
    QualityPoint before;
    QualityPoint after;
    std::vector<CandidateScore> candidate_scores;
    std::int64_t unmixings = 0;  // candidate unmixings performed in this step
};

struct ReductionTrace {
    EndmemberSet initial;
    std::vector<ReductionStep> steps;  // down to set size 1
    double alpha = 0.5;

    // quality points along the trace, sizes m down to 1
    std::vector<QualityPoint> quality_points() const {
        std::vector<QualityPoint> pts;
        if (steps.empty()) return pts;
        pts.push_back(steps.front().before);
        for (const auto& s : steps) pts.push_back(s.after);
        return pts;
    }

    // replay removals to recover the set at a given size
    EndmemberSet set_at_size(int size) const {
        EndmemberSet set = initial;
        for (const auto& s : steps) {
            if (set.size() == size) break;
            set = set.without(s.removed_column);
        }
        if (set.size() != size)
            throw Error("ReductionTrace: no set of size " + std::to_string(size));
        return set;
    }

    std::int64_t total_unmixings() const {
        std::int64_t total = 0;
        for (const auto& s : steps) total += s.unmixings;
        return total;
    }
};

// One greedy removal. Every member is tried: unmix with the set minus that
// member, then score the removal by the blended relative gain in condition
// number and relative loss in RMSE. The argmax is removed; ties go to the
// lowest column index. Division guards: the RMSE term is zero when the
// parent RMSE vanishes, and the kappa term's KAPPA_CAP arithmetic makes
// removing a duplicate (finite kappa after) score near 1 while keeping a
// still-degenerate set scores 0.
inline ReductionStep reduce_step(const EndmemberSet& set, const SpectralImage& image,
                                 const ReductionConfig& config,
                                 const QualityPoint* known_before = nullptr) {
    config.validate();
    const int m = set.size();
    if (m < 2) throw Error("reduce_step: set size >= 2 required");

    ReductionStep step;
    step.before = known_before ? *known_before : measure_quality(set, image, config.solver);
    step.before.set_size = m;
    step.candidate_scores.resize(m);

    for (int j = 0; j < m; ++j) {
        CandidateScore& cand = step.candidate_scores[j];
        cand.column = j;
        cand.member = set.members[j];
        const EndmemberSet candidate_set = set.without(j);
        QualityPoint q;
        try {
            q = measure_quality(candidate_set, image, config.solver);
        } catch (const NumericalError& e) {
            throw NumericalError(std::string(e.what()) + " (candidate column " +
                                 std::to_string(j) + ", " + cand.member.name + ")");
        }
        cand.kappa_after = q.kappa;
        cand.rmse_after = q.rmse;
        cand.kappa_term = (step.before.kappa - q.kappa) / step.before.kappa;
        cand.rmse_term = step.before.rmse < config.eps_rmse
                             ? 0.0
                             : (step.before.rmse - q.rmse) / step.before.rmse;
        cand.score = (1.0 - config.alpha) * cand.kappa_term + config.alpha * cand.rmse_term;
        step.unmixings += 1;
    }

    int best = 0;
    for (int j = 1; j < m; ++j)
        if (step.candidate_scores[j].score > step.candidate_scores[best].score) best = j;

    step.removed_column = best;
    step.removed = step.candidate_scores[best].member;
    step.score = step.candidate_scores[best].score;
    step.after.kappa = step.candidate_scores[best].kappa_after;
    step.after.rmse = step.candidate_scores[best].rmse_after;
    step.after.set_size = m - 1;
    return step;
}

// Full nested reduction S_m down to S_1.
inline ReductionTrace reduce_full(const EndmemberSet& set, const SpectralImage& image,
                                  const ReductionConfig& config) {
    config.validate();
    if (set.size() < 2) throw Error("reduce_full: set size >= 2 required");
    ReductionTrace trace;
    trace.initial = set;
    trace.alpha = config.alpha;
    EndmemberSet current = set;
    QualityPoint before = measure_quality(current, image, config.solver);
    while (current.size() >= 2) {
        ReductionStep step = reduce_step(current, image, config, &before);
        current = current.without(step.removed_column);
        before = step.after;
        trace.steps.push_back(std::move(step));
    }
    return trace;
}

struct BruteForcePoint {
    std::uint64_t mask = 0;  // bit j set = column j of the parent set included
    QualityPoint quality;
};

// kappa/RMSE for every k-subset of `set`, lexicographic bitmask order.
inline std::vector<BruteForcePoint> brute_force_subsets(const EndmemberSet& set,
                                                        const SpectralImage& image, int k,
                                                        const SolverConfig& solver = {},
                                                        std::int64_t cap = 200000,
                                                        bool force = false) {
    const int m = set.size();
    if (k < 1 || k > m) throw Error("brute_force_subsets: k must be in [1, m]");
    if (m > 62) throw Error("brute_force_subsets: set too large for bitmask enumeration");

    std::int64_t count = 1;
    for (int i = 0; i < k; ++i) count = count * (m - i) / (i + 1);
    if (count > cap && !force)
        throw Error("brute_force_subsets: C(" + std::to_string(m) + "," + std::to_string(k) +
                    ") = " + std::to_string(count) + " exceeds cap " + std::to_string(cap));

    std::vector<BruteForcePoint> points;
    points.reserve(static_cast<std::size_t>(count));
    std::uint64_t mask = (std::uint64_t{1} << k) - 1;
    const std::uint64_t end = std::uint64_t{1} << m;
    while (mask < end) {
        EndmemberSet subset;
        subset.label = set.label;
        subset.spectra.resize(set.bands(), k);
        int col = 0;
        for (int j = 0; j < m; ++j) {
            if (mask & (std::uint64_t{1} << j)) {
                subset.spectra.col(col++) = set.spectra.col(j);
                subset.members.push_back(set.members[j]);
            }
        }
        BruteForcePoint point;
        point.mask = mask;
        point.quality = measure_quality(subset, image, solver);
        points.push_back(std::move(point));
        // Gosper's hack: next bitmask with k bits set
        const std::uint64_t c = mask & (~mask + 1);
        const std::uint64_t r = mask + c;
        mask = (((r ^ mask) >> 2) / c) | r;
    }
    return points;
}

// Trace CSV: '#' comment lines carry alpha and label, then one row per step.
inline void save_trace_csv(const ReductionTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    char buf[64];
    auto g17 = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "# alpha = " << g17(trace.alpha) << '\n';
    out << "# label = " << trace.initial.label << '\n';
    out << "step,size_before,removed_column,removed_name,score,kappa_before,rmse_before,"
           "kappa_after,rmse_after,unmixings\n";
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const ReductionStep& st = trace.steps[s];
        out << s << ',' << st.before.set_size << ',' << st.removed_column << ','
            << st.removed.name << ',' << g17(st.score) << ',' << g17(st.before.kappa) << ','
            << g17(st.before.rmse) << ',' << g17(st.after.kappa) << ',' << g17(st.after.rmse)
            << ',' << st.unmixings << '\n';
    }
    if (!out) throw IoError("write failed: " + path.string());
}

// Quality points and alpha back from a trace CSV (enough to rebuild diagram
// curves; candidate details are not persisted).
struct TraceSummary {
    double alpha = 0.5;
    std::string label;
    std::vector<QualityPoint> points;  // sizes m down to 1
};

inline TraceSummary load_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open: " + path.string());
    TraceSummary summary;
    std::string line;
    bool have_first = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.front() == '#') {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(1, eq - 1);
            const std::string value = line.substr(eq + 1);
            if (key.find("alpha") != std::string::npos) summary.alpha = std::stod(value);
            else if (key.find("label") != std::string::npos) {
                auto b = value.find_first_not_of(" \t");
                summary.label = b == std::string::npos ? "" : value.substr(b);
            }
            continue;
        }
        if (line.rfind("step,", 0) == 0) continue;  // header
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) fields.push_back(tok);
        if (fields.size() < 10) throw IoError(path.string() + ": malformed trace row");
        const int size_before = std::stoi(fields[1]);
        if (!have_first) {
            summary.points.push_back({std::stod(fields[5]), std::stod(fields[6]), size_before});
            have_first = true;
        }
        summary.points.push_back({std::stod(fields[7]), std::stod(fields[8]), size_before - 1});
    }
    if (summary.points.empty()) throw IoError(path.string() + ": empty trace");
    return summary;
}

}  // namespace emreduce

#endif
