// emreduce: endmember extraction, constrained unmixing, and greedy reduction
// of over-complete endmember sets with condition-residuum diagram export.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "emreduce/emreduce.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

emreduce::SpectralImage load_image(const std::string& image_path, const std::string& data_path) {
    const fs::path p(image_path);
    const std::string ext = p.extension().string();
    if (ext == ".csv") return emreduce::load_csv_image(p);
    if (ext == ".hdr") {
        if (!data_path.empty()) return emreduce::load_envi(p, data_path);
        for (const char* cand : {".raw", ".img", ".dat", ".bin", ""}) {
            fs::path d = p;
            d.replace_extension(cand);
            if (fs::exists(d) && d != p) return emreduce::load_envi(p, d);
        }
        throw emreduce::IoError("no data file found next to " + image_path +
                                " (use --data to point at it)");
    }
    // raw cube given directly: look for a sibling .hdr
    fs::path hdr = p;
    hdr.replace_extension(".hdr");
    if (fs::exists(hdr)) return emreduce::load_envi(hdr, p);
    throw emreduce::IoError("cannot determine format of " + image_path +
                            " (expected .csv, .hdr, or a cube with a sibling .hdr)");
}

emreduce::Extractor parse_algo(const std::string& name) {
    if (name == "osp") return emreduce::Extractor::osp;
    if (name == "nfindr") return emreduce::Extractor::nfindr;
    if (name == "vca") return emreduce::Extractor::vca;
    throw emreduce::Error("unknown extractor '" + name + "' (expected osp|nfindr|vca)");
}

std::string alpha_tag(double alpha) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", alpha);
    return buf;
}

std::optional<emreduce::CropWindow> parse_crop(const std::vector<double>& values) {
    if (values.empty()) return std::nullopt;
    if (values.size() != 4)
        throw emreduce::Error("--crop expects kappa_min kappa_max rmse_min rmse_max");
    emreduce::CropWindow w{values[0], values[1], values[2], values[3]};
    w.validate();
    return w;
}

struct PipelineConfig {
    std::string image;
    std::string data;
    std::string dataset;
    std::string algo = "osp";
    int m_ref = 0;
    int m_over = 0;  // 0 = 2 * m_ref
    std::vector<double> alphas = {0.0, 0.5, 1.0};
    int runs = 0;  // 0 = 10 for nfindr/vca, 1 for osp
    std::uint64_t seed = 0;
    std::vector<double> crop;
    std::string out = "emreduce-out";
    double tol = 1e-9;
    int max_iter = 0;
    int bruteforce_k = 0;  // 0 = skip
    std::int64_t bruteforce_cap = 200000;
    bool linear_kappa = false;
};

void apply_json_config(PipelineConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw emreduce::IoError("cannot open config: " + path);
    json j = json::parse(in);
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("image", cfg.image);
    get("data", cfg.data);
    get("dataset", cfg.dataset);
    get("algo", cfg.algo);
    get("m_ref", cfg.m_ref);
    get("m_over", cfg.m_over);
    get("alphas", cfg.alphas);
    get("runs", cfg.runs);
    get("seed", cfg.seed);
    get("crop", cfg.crop);
    get("out", cfg.out);
    get("tol", cfg.tol);
    get("max_iter", cfg.max_iter);
    get("bruteforce_k", cfg.bruteforce_k);
    get("bruteforce_cap", cfg.bruteforce_cap);
    get("linear_kappa", cfg.linear_kappa);
}

int run_pipeline(const PipelineConfig& cfg) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    auto elapsed_ms = [&](clock::time_point since) {
        return std::chrono::duration_cast<std::chrono::milliseconds>(clock::now() - since).count();
    };

    PipelineConfig c = cfg;
    if (!c.dataset.empty()) {
        const auto info = emreduce::find_dataset(c.dataset);
        if (!info) throw emreduce::Error("unknown dataset '" + c.dataset + "'");
        if (c.m_ref == 0) c.m_ref = info->m_ref;
    }
    if (c.m_ref < 1) throw emreduce::Error("pipeline: --m-ref (or --dataset) required");
    if (c.m_over == 0) c.m_over = 2 * c.m_ref;
    if (c.m_over < c.m_ref) throw emreduce::Error("pipeline: m_over >= m_ref required");
    if (c.image.empty()) throw emreduce::Error("pipeline: --image required");

    const emreduce::Extractor algo = parse_algo(c.algo);
    int runs = c.runs;
    if (runs == 0) runs = emreduce::extractor_deterministic(algo) ? 1 : 10;
    if (emreduce::extractor_deterministic(algo) && runs > 1) {
        std::cerr << "warning: " << c.algo << " is deterministic, coercing --runs " << runs
                  << " to 1\n";
        runs = 1;
    }

    fs::create_directories(c.out);
    const fs::path outdir(c.out);
    std::ofstream report(outdir / "report.txt");

    const emreduce::SpectralImage image = load_image(c.image, c.data);
    report << "image: " << c.image << " (" << image.bands() << " bands, " << image.pixels()
           << " pixels)\n";
    if (!c.dataset.empty()) {
        const auto info = *emreduce::find_dataset(c.dataset);
        report << "dataset: " << info.display_name << " m_ref=" << info.m_ref
               << " (HySime reference estimate: " << info.hysime_estimate << ")\n";
    }
    report << "algo: " << c.algo << " m_ref=" << c.m_ref << " m_over=" << c.m_over
           << " runs=" << runs << " seed=" << c.seed << "\n\n";

    emreduce::SolverConfig solver;
    solver.tolerance = c.tol;
    solver.max_iterations = c.max_iter;

    // over-complete set (first seed) drives the reduction curves
    auto t_extract = clock::now();
    emreduce::ExtractionConfig ex;
    ex.target_size = c.m_over;
    ex.seed = c.seed;
    const emreduce::EndmemberSet over_set = emreduce::extract(algo, image, ex);
    emreduce::save_endmembers(over_set, outdir / "over_complete.csv");
    report << "extraction of m_over set: " << elapsed_ms(t_extract) << " ms\n";

    std::vector<emreduce::TraceSummary> summaries;
    for (const double alpha : c.alphas) {
        auto t_alpha = clock::now();
        emreduce::ReductionConfig rc;
        rc.alpha = alpha;
        rc.solver = solver;
        const emreduce::ReductionTrace trace = emreduce::reduce_full(over_set, image, rc);
        const fs::path trace_path = outdir / ("trace_alpha" + alpha_tag(alpha) + ".csv");
        emreduce::save_trace_csv(trace, trace_path);

        emreduce::TraceSummary summary;
        summary.alpha = alpha;
        summary.label = c.algo + " a=" + alpha_tag(alpha);
        summary.points = trace.quality_points();
        summaries.push_back(summary);

        report << "reduction alpha=" << alpha_tag(alpha) << ": " << elapsed_ms(t_alpha)
               << " ms, " << trace.total_unmixings() << " candidate unmixings\n";
        report << "  level kappa rmse unmixings\n";
        for (const auto& step : trace.steps) {
            char line[160];
            std::snprintf(line, sizeof line, "  %5d %.6g %.6g %lld\n", step.before.set_size,
                          step.before.kappa, step.before.rmse,
                          static_cast<long long>(step.unmixings));
            report << line;
        }
        const auto& last = trace.steps.back().after;
        char line[160];
        std::snprintf(line, sizeof line, "  %5d %.6g %.6g 0\n", last.set_size, last.kappa,
                      last.rmse);
        report << line;
    }

    // direct extractions at m_ref and m_over, runs-many for seeded algorithms
    std::vector<emreduce::DiagramPoint> extra;
    auto t_direct = clock::now();
    for (int r = 0; r < runs; ++r) {
        for (const int m : {c.m_ref, c.m_over}) {
            emreduce::ExtractionConfig dx;
            dx.target_size = m;
            dx.seed = c.seed + static_cast<std::uint64_t>(r);
            const emreduce::EndmemberSet set = emreduce::extract(algo, image, dx);
            emreduce::DiagramPoint pt;
            pt.quality = emreduce::measure_quality(set, image, solver);
            pt.label = c.algo + " direct m=" + std::to_string(m);
            pt.source = emreduce::PointSource::direct;
            pt.run_index = r;
            extra.push_back(std::move(pt));
        }
    }
    report << "\ndirect extractions (" << runs << " run(s) at m_ref and m_over): "
           << elapsed_ms(t_direct) << " ms\n";

    if (c.bruteforce_k > 0) {
        auto t_brute = clock::now();
        const auto points = emreduce::brute_force_subsets(over_set, image, c.bruteforce_k,
                                                          solver, c.bruteforce_cap);
        for (const auto& bp : points) {
            emreduce::DiagramPoint pt;
            pt.quality = bp.quality;
            pt.label = "subset " + std::to_string(bp.mask);
            pt.source = emreduce::PointSource::bruteforce;
            extra.push_back(std::move(pt));
        }
        report << "bruteforce k=" << c.bruteforce_k << ": " << points.size() << " subsets, "
               << elapsed_ms(t_brute) << " ms\n";
    }

    emreduce::DiagramOptions opts;
    opts.crop = parse_crop(c.crop);
    opts.kappa_log_scale = !c.linear_kappa;
    const emreduce::DiagramSpec diagram = emreduce::build_diagram(summaries, extra, opts);
    emreduce::export_csv(diagram, outdir / "diagram.csv");
    emreduce::export_svg(diagram, outdir / "diagram.svg");
    report << "total: " << elapsed_ms(t0) << " ms\n";

    std::cout << "wrote " << (outdir / "diagram.csv").string() << ", diagram.svg, report.txt and "
              << summaries.size() << " trace file(s)\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"endmember set reduction with condition-residuum diagrams"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic linear-mixture scene");
    emreduce::SynthSpec synth_spec;
    std::string synth_out = "scene";
    std::string synth_format = "csv";
    synth_cmd->add_option("--bands", synth_spec.bands, "spectral bands");
    synth_cmd->add_option("--k", synth_spec.true_endmembers, "true endmember count");
    synth_cmd->add_option("--pixels", synth_spec.pixels, "pixel count");
    synth_cmd->add_option("--noise", synth_spec.noise_sigma, "gaussian noise sigma");
    synth_cmd->add_option("--copies", synth_spec.pure_pixel_copies, "pure pixels per endmember");
    synth_cmd->add_option("--dirichlet", synth_spec.dirichlet_concentration,
                          "Dirichlet concentration for mixed pixels");
    synth_cmd->add_option("--max-condition", synth_spec.max_condition,
                          "rejection bound on the true set's condition number");
    synth_cmd->add_option("--seed", synth_spec.seed, "random seed");
    synth_cmd->add_option("--out", synth_out, "output path prefix");
    synth_cmd->add_option("--format", synth_format, "envi|csv")
        ->check(CLI::IsMember({"envi", "csv"}));

    // ---- extract ----
    auto* extract_cmd = app.add_subcommand("extract", "extract an endmember set from a cube");
    std::string ex_image, ex_data, ex_algo = "osp", ex_out = "endmembers.csv";
    emreduce::ExtractionConfig ex_cfg;
    int ex_runs = 1;
    extract_cmd->add_option("--image", ex_image, "cube (.csv or ENVI .hdr)")->required();
    extract_cmd->add_option("--data", ex_data, "ENVI data file (when not next to the header)");
    extract_cmd->add_option("--algo", ex_algo, "osp|nfindr|vca")
        ->check(CLI::IsMember({"osp", "nfindr", "vca"}));
    extract_cmd->add_option("--m", ex_cfg.target_size, "endmembers to extract")->required();
    extract_cmd->add_option("--seed", ex_cfg.seed, "random seed");
    extract_cmd->add_option("--runs", ex_runs, "repeat with seeds seed..seed+R-1");
    extract_cmd->add_option("--nfindr-sweeps", ex_cfg.nfindr_max_sweeps, "max N-FINDR sweeps");
    extract_cmd->add_flag("--vca-snr-projection", ex_cfg.vca_snr_projection,
                          "use the mean-centered projection variant of VCA");
    extract_cmd->add_option("--out", ex_out, "output endmember CSV");

    // ---- unmix ----
    auto* unmix_cmd = app.add_subcommand("unmix", "solve per-pixel abundances");
    std::string um_image, um_data, um_endmembers, um_mode = "fcls", um_out = "abundances.csv";
    emreduce::SolverConfig um_solver;
    unmix_cmd->add_option("--image", um_image, "cube (.csv or ENVI .hdr)")->required();
    unmix_cmd->add_option("--data", um_data, "ENVI data file");
    unmix_cmd->add_option("--endmembers", um_endmembers, "endmember CSV")->required();
    unmix_cmd->add_option("--mode", um_mode, "fcls|ucls")->check(CLI::IsMember({"fcls", "ucls"}));
    unmix_cmd->add_option("--tol", um_solver.tolerance, "solver tolerance");
    unmix_cmd->add_option("--max-iter", um_solver.max_iterations, "iteration cap (0 = auto)");
    unmix_cmd->add_option("--out", um_out, "output abundance CSV");

    // ---- reduce ----
    auto* reduce_cmd = app.add_subcommand("reduce", "greedy reduction of an endmember set");
    std::string rd_image, rd_data, rd_in, rd_trace = "trace.csv";
    emreduce::ReductionConfig rd_cfg;
    reduce_cmd->add_option("--image", rd_image, "cube (.csv or ENVI .hdr)")->required();
    reduce_cmd->add_option("--data", rd_data, "ENVI data file");
    reduce_cmd->add_option("--in", rd_in, "endmember CSV to reduce")->required();
    reduce_cmd->add_option("--alpha", rd_cfg.alpha, "RMSE weight in [0,1]");
    reduce_cmd->add_option("--tol", rd_cfg.solver.tolerance, "solver tolerance");
    reduce_cmd->add_option("--max-iter", rd_cfg.solver.max_iterations, "iteration cap");
    reduce_cmd->add_option("--trace-out", rd_trace, "output trace CSV");

    // ---- bruteforce ----
    auto* brute_cmd = app.add_subcommand("bruteforce", "evaluate every k-subset of a set");
    std::string bf_image, bf_data, bf_in, bf_out = "bruteforce.csv";
    int bf_k = 1;
    std::int64_t bf_cap = 200000;
    bool bf_force = false;
    emreduce::SolverConfig bf_solver;
    brute_cmd->add_option("--image", bf_image, "cube (.csv or ENVI .hdr)")->required();
    brute_cmd->add_option("--data", bf_data, "ENVI data file");
    brute_cmd->add_option("--in", bf_in, "endmember CSV")->required();
    brute_cmd->add_option("--k", bf_k, "subset size")->required();
    brute_cmd->add_option("--cap", bf_cap, "refuse more than this many subsets");
    brute_cmd->add_flag("--force", bf_force, "ignore the cap");
    brute_cmd->add_option("--tol", bf_solver.tolerance, "solver tolerance");
    brute_cmd->add_option("--out", bf_out, "output diagram CSV");

    // ---- diagram ----
    auto* diagram_cmd = app.add_subcommand("diagram", "assemble a condition-residuum diagram");
    std::vector<std::string> dg_traces, dg_point_files;
    std::vector<double> dg_crop;
    std::string dg_csv = "diagram.csv", dg_svg = "diagram.svg";
    bool dg_linear = false, dg_no_annotate = false;
    diagram_cmd->add_option("--trace", dg_traces, "trace CSV file(s)");
    diagram_cmd->add_option("--points", dg_point_files, "diagram CSV file(s) to merge");
    diagram_cmd->add_option("--crop", dg_crop,
                            "kappa_min kappa_max rmse_min rmse_max")->expected(4);
    diagram_cmd->add_flag("--linear-kappa", dg_linear, "linear kappa axis (default log10)");
    diagram_cmd->add_flag("--no-annotate", dg_no_annotate, "suppress set-size labels");
    diagram_cmd->add_option("--out-csv", dg_csv, "output CSV");
    diagram_cmd->add_option("--out-svg", dg_svg, "output SVG");

    // ---- datasets ----
    auto* datasets_cmd = app.add_subcommand("datasets", "list built-in dataset metadata");

    // ---- pipeline ----
    auto* pipe_cmd = app.add_subcommand("pipeline", "extract, reduce, and export diagrams");
    PipelineConfig pcfg;
    std::string pipe_config_file;
    // a JSON config file provides defaults; explicit flags override it
    for (int i = 1; i < argc - 1; ++i)
        if (std::string(argv[i]) == "--config") pipe_config_file = argv[i + 1];
    if (!pipe_config_file.empty()) {
        try {
            apply_json_config(pcfg, pipe_config_file);
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << '\n';
            return kExitInput;
        }
    }
    pipe_cmd->add_option("--config", pipe_config_file, "JSON config file");
    pipe_cmd->add_option("--image", pcfg.image, "cube (.csv or ENVI .hdr)");
    pipe_cmd->add_option("--data", pcfg.data, "ENVI data file");
    pipe_cmd->add_option("--dataset", pcfg.dataset, "registry key (fills m_ref)");
    pipe_cmd->add_option("--algo", pcfg.algo, "osp|nfindr|vca")
        ->check(CLI::IsMember({"osp", "nfindr", "vca"}));
    pipe_cmd->add_option("--m-ref", pcfg.m_ref, "reference set size");
    pipe_cmd->add_option("--m-over", pcfg.m_over, "over-complete size (default 2*m_ref)");
    pipe_cmd->add_option("--alphas", pcfg.alphas, "reduction alphas");
    pipe_cmd->add_option("--runs", pcfg.runs, "direct-extraction runs (default 10, osp 1)");
    pipe_cmd->add_option("--seed", pcfg.seed, "random seed");
    pipe_cmd->add_option("--crop", pcfg.crop,
                         "kappa_min kappa_max rmse_min rmse_max")->expected(4);
    pipe_cmd->add_option("--tol", pcfg.tol, "solver tolerance");
    pipe_cmd->add_option("--max-iter", pcfg.max_iter, "iteration cap");
    pipe_cmd->add_option("--bruteforce-k", pcfg.bruteforce_k, "also brute-force k-subsets");
    pipe_cmd->add_option("--bruteforce-cap", pcfg.bruteforce_cap, "subset count cap");
    pipe_cmd->add_flag("--linear-kappa", pcfg.linear_kappa, "linear kappa axis");
    pipe_cmd->add_option("--out", pcfg.out, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) {
            const emreduce::SynthScene scene = emreduce::synthesize(synth_spec);
            const fs::path prefix(synth_out);
            if (synth_format == "envi") {
                fs::path hdr = prefix, raw = prefix;
                hdr += ".hdr";
                raw += ".raw";
                emreduce::save_envi(scene.image, hdr, raw);
            } else {
                fs::path csv = prefix;
                csv += ".csv";
                emreduce::save_csv_image(scene.image, csv);
            }
            fs::path em = prefix, ab = prefix;
            em += "_truth_endmembers.csv";
            ab += "_truth_abundances.csv";
            emreduce::save_endmembers(scene.ground_truth, em);
            emreduce::save_abundances(scene.abundances, ab);
            std::cout << "wrote scene with " << scene.image.pixels() << " pixels, "
                      << scene.ground_truth.size() << " true endmembers\n";
        } else if (extract_cmd->parsed()) {
            const emreduce::SpectralImage image = load_image(ex_image, ex_data);
            const emreduce::Extractor algo = parse_algo(ex_algo);
            if (emreduce::extractor_deterministic(algo) && ex_runs > 1) {
                std::cerr << "warning: osp is deterministic, coercing --runs " << ex_runs
                          << " to 1\n";
                ex_runs = 1;
            }
            for (int r = 0; r < ex_runs; ++r) {
                emreduce::ExtractionConfig cfg = ex_cfg;
                cfg.seed = ex_cfg.seed + static_cast<std::uint64_t>(r);
                const emreduce::EndmemberSet set = emreduce::extract(algo, image, cfg);
                fs::path out(ex_out);
                if (ex_runs > 1) {
                    fs::path stem = out.stem();
                    stem += "_run" + std::to_string(r);
                    stem += out.extension();
                    out = out.parent_path() / stem;
                }
                emreduce::save_endmembers(set, out);
                std::cout << "wrote " << out.string() << '\n';
            }
        } else if (unmix_cmd->parsed()) {
            const emreduce::SpectralImage image = load_image(um_image, um_data);
            const emreduce::EndmemberSet set = emreduce::load_endmembers(um_endmembers);
            um_solver.mode = um_mode == "ucls" ? emreduce::UnmixMode::unconstrained
                                               : emreduce::UnmixMode::fully_constrained;
            const emreduce::AbundanceMap a = emreduce::unmix(set, image, um_solver);
            emreduce::save_abundances(a, um_out);
            std::cout << "rmse = " << emreduce::rmse(set, a, image)
                      << ", kappa = " << emreduce::condition_number(set) << '\n';
        } else if (reduce_cmd->parsed()) {
            const emreduce::SpectralImage image = load_image(rd_image, rd_data);
            const emreduce::EndmemberSet set = emreduce::load_endmembers(rd_in);
            const emreduce::ReductionTrace trace = emreduce::reduce_full(set, image, rd_cfg);
            emreduce::save_trace_csv(trace, rd_trace);
            std::cout << "wrote " << rd_trace << " (" << trace.steps.size() << " steps, "
                      << trace.total_unmixings() << " unmixings)\n";
        } else if (brute_cmd->parsed()) {
            const emreduce::SpectralImage image = load_image(bf_image, bf_data);
            const emreduce::EndmemberSet set = emreduce::load_endmembers(bf_in);
            const auto points =
                emreduce::brute_force_subsets(set, image, bf_k, bf_solver, bf_cap, bf_force);
            emreduce::DiagramSpec spec;
            for (const auto& bp : points) {
                emreduce::DiagramPoint pt;
                pt.quality = bp.quality;
                pt.label = "subset " + std::to_string(bp.mask);
                pt.source = emreduce::PointSource::bruteforce;
                spec.points.push_back(std::move(pt));
            }
            emreduce::export_csv(spec, bf_out);
            std::cout << "wrote " << bf_out << " (" << points.size() << " subsets)\n";
        } else if (diagram_cmd->parsed()) {
            std::vector<emreduce::TraceSummary> summaries;
            for (const auto& t : dg_traces) summaries.push_back(emreduce::load_trace_csv(t));
            std::vector<emreduce::DiagramPoint> extra;
            for (const auto& f : dg_point_files)
                for (auto& pt : emreduce::load_diagram_csv(f)) extra.push_back(std::move(pt));
            emreduce::DiagramOptions opts;
            opts.crop = parse_crop(dg_crop);
            opts.kappa_log_scale = !dg_linear;
            opts.annotate_sizes = !dg_no_annotate;
            const emreduce::DiagramSpec spec = emreduce::build_diagram(summaries, extra, opts);
            emreduce::export_csv(spec, dg_csv);
            emreduce::export_svg(spec, dg_svg);
            std::cout << "wrote " << dg_csv << " and " << dg_svg << '\n';
        } else if (datasets_cmd->parsed()) {
            std::printf("%-22s %9s %6s %6s %7s\n", "name", "size", "bands", "m_ref", "HySime");
            for (const auto& d : emreduce::dataset_registry())
                std::printf("%-22s %4dx%-4d %6d %6d %7d\n", d.key.c_str(), d.width, d.height,
                            d.bands, d.m_ref, d.hysime_estimate);
        } else if (pipe_cmd->parsed()) {
            return run_pipeline(pcfg);
        }
    } catch (const emreduce::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitOk;
}
