#include "raterlab/cli.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "raterlab/clustering.hpp"
#include "raterlab/error.hpp"
#include "raterlab/eval.hpp"
#include "raterlab/fusion.hpp"
#include "raterlab/io.hpp"
#include "raterlab/kernels.hpp"
#include "raterlab/parallel.hpp"
#include "raterlab/predictors.hpp"
#include "raterlab/runner.hpp"
#include "raterlab/rvol.hpp"
#include "raterlab/simulate.hpp"
#include "raterlab/style.hpp"

#ifndef RATERLAB_VERSION
#define RATERLAB_VERSION "dev"
#endif

namespace raterlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
    std::string log_level = "warn";
};

std::shared_ptr<spdlog::logger> logger() {
    auto l = spdlog::get("raterlab");
    return l ? l : spdlog::stderr_logger_mt("raterlab");
}

json base_metadata(const std::string& command, const Globals& g, std::size_t threads) {
    return {{"tool", "raterlab"},
            {"version", RATERLAB_VERSION},
            {"command", command},
            {"threads", threads},
            {"log_level", g.log_level},
            {"kernels", std::string(kernels::isa_name(kernels::active().isa))}};
}

void write_sidecar(const fs::path& out, const json& meta) {
    write_file_atomic(fs::path(out.string() + ".meta.json"), meta.dump(2) + "\n");
}

void warn_flags(const std::vector<std::string>& flags) {
    for (const auto& f : flags) logger()->warn("{}", f);
}

// ---------------------------------------------------------------------------

struct FuseArgs {
    std::string manifest, subject, method = "majority", center, raters, out, posterior;
    double tol = 1e-7;
    int max_iters = 100;
};

RaterFilter subset_filter(const std::string& center, const std::string& raters, std::string* label) {
    if (!center.empty()) {
        *label = "center:" + center;
        return ConsensusScope::center(center).filter();
    }
    if (!raters.empty()) {
        *label = "raters:" + raters;
        return ConsensusScope::parse("raters:" + raters).filter();
    }
    *label = "global";
    return ConsensusScope::global().filter();
}

void cmd_fuse(const FuseArgs& a, const Globals& g, std::size_t threads) {
    const auto manifest = DatasetManifest::load(a.manifest);
    const FusionMethod method = parse_fusion_method(a.method);
    std::string scope;
    const auto filter = subset_filter(a.center, a.raters, &scope);
    StapleParams init;
    init.tol = a.tol;
    init.max_iters = a.max_iters;
    const auto masks = load_subject_masks(manifest, a.subject, filter);
    if (masks.empty()) throw Error("fuse: no rater of scope " + scope + " labelled subject " + a.subject);
    std::vector<Volume> vols;
    json ids = json::array();
    for (const auto& m : masks) {
        vols.push_back(m.mask);
        ids.push_back(m.rater_id);
    }
    const FusionResult r = method == FusionMethod::Majority ? majority_vote(vols) : staple(vols, init);
    save_volume(a.out, r.consensus);
    if (!a.posterior.empty()) {
        if (!r.posterior) throw Error("fuse: --posterior needs --method staple");
        save_volume(a.posterior, *r.posterior);
    }
    json meta = base_metadata("fuse", g, threads);
    meta["config"] = {{"manifest", a.manifest}, {"subject", a.subject}, {"method", to_string(method)},
                      {"scope", scope},         {"tol", a.tol},         {"max_iters", a.max_iters}};
    meta["raters"] = ids;
    meta["iterations"] = r.iterations;
    meta["converged"] = r.converged;
    meta["degenerate"] = r.degenerate;
    if (r.final_params) {
        meta["sensitivity"] = r.final_params->sensitivity;
        meta["specificity"] = r.final_params->specificity;
    }
    write_sidecar(a.out, meta);
    if (!r.converged) logger()->warn("fuse: STAPLE stopped after {} iterations without converging", r.iterations);
    if (r.degenerate) logger()->warn("fuse: STAPLE hit a vanishing M-step denominator");
}

// ---------------------------------------------------------------------------

struct StyleArgs {
    std::string manifest, consensus = "majority", scope = "global", out;
    bool relative = false, slice_wise = false;
};

StyleTable compute_style(const StyleArgs& a, std::size_t threads) {
    const auto manifest = DatasetManifest::load(a.manifest);
    StyleOptions opt;
    opt.slice_wise = a.slice_wise;
    opt.threads = threads;
    StyleTable t = style_table(manifest, parse_fusion_method(a.consensus), ConsensusScope::parse(a.scope), opt);
    if (!a.relative) {
        for (auto& r : t.rows) {
            r.relative_bias.reset();
            r.relative_consistency.reset();
        }
    }
    return t;
}

void cmd_style(const StyleArgs& a, const Globals& g, std::size_t threads) {
    const StyleTable t = compute_style(a, threads);
    write_file_atomic(a.out, style_table_csv(t));
    json meta = base_metadata("style", g, threads);
    meta["config"] = {{"manifest", a.manifest},     {"consensus", a.consensus}, {"scope", t.consensus_scope.describe()},
                      {"relative", a.relative},     {"slice_wise", a.slice_wise}};
    write_sidecar(a.out, meta);
    for (const auto& r : t.rows)
        if (a.relative && r.skipped_images > 0)
            logger()->warn("style: rater {}: {} image(s) with empty consensus skipped in relative metrics", r.rater_id,
                           r.skipped_images);
}

// ---------------------------------------------------------------------------

struct ClusterArgs {
    std::string style, out;
};

void cmd_cluster(const ClusterArgs& a, const Globals& g, std::size_t threads) {
    const auto table = parse_style_csv(read_file(a.style));
    const auto report = cluster_report(style_points(table));
    json meta = base_metadata("cluster", g, threads);
    meta["config"] = {{"style", a.style}};
    write_file_atomic(a.out, cluster_report_json(report, meta.dump()));
    if (!report.db_index) logger()->warn("cluster: Davies-Bouldin index undefined: {}", report.note);
}

// ---------------------------------------------------------------------------

struct UncertaintyArgs {
    std::string manifest, predictor = "synthetic:biased", out, maps_dir, dice_out, consensus = "majority";
    std::size_t n = 10;
    double rot = 10.0, trans = 3.0, scale = 0.02;
    bool with_consensus = false, export_only = false;
    SyntheticParams synthetic;
};

constexpr std::uint64_t kUncertaintySeed = 1234;

UncertaintyRun compute_uncertainty(const UncertaintyArgs& a, std::uint64_t seed, std::size_t threads,
                                   json* predictor_info) {
    const auto manifest = DatasetManifest::load(a.manifest);
    UncertaintyRunOptions opt;
    opt.tta.n_samples = a.n;
    opt.tta.seed = seed;
    opt.tta.ranges = TtaRanges::symmetric(a.rot, a.trans, a.scale);
    opt.tta.threads = threads;
    opt.consensus = parse_fusion_method(a.consensus);
    if (!a.maps_dir.empty()) opt.maps_dir = a.maps_dir;

    PredictorFactory factory;
    std::map<std::string, double> fitted;
    const auto colon = a.predictor.find(':');
    const std::string kind = a.predictor.substr(0, colon);
    const std::string arg = colon == std::string::npos ? "" : a.predictor.substr(colon + 1);
    if (arg.empty()) throw Error("--predictor must be precomputed:<dir>, cmd:<argv> or synthetic:<name>");
    if (kind == "synthetic") {
        factory = synthetic_factory(manifest, arg, a.synthetic, &fitted);
    } else if (kind == "precomputed") {
        auto p = std::make_shared<PrecomputedPredictor>(arg, a.export_only);
        factory = [p](const ModelSpec&, const ModelTargets&) { return p; };
    } else if (kind == "cmd") {
        auto p = std::make_shared<SubprocessPredictor>(SubprocessPredictor::from_command_line(arg));
        factory = [p](const ModelSpec&, const ModelTargets&) { return p; };
    } else {
        throw Error("unknown predictor kind '" + kind + "'");
    }
    auto run = run_uncertainty(manifest, model_specs(manifest, a.with_consensus), factory, opt);
    if (predictor_info) {
        (*predictor_info)["name"] = a.predictor;
        if (kind == "synthetic")
            (*predictor_info)["params"] = {{"sigma", a.synthetic.sigma},
                                           {"sigma_base", a.synthetic.sigma_base},
                                           {"sigma_gain", a.synthetic.sigma_gain}};
        if (!fitted.empty()) (*predictor_info)["fitted_bias_px"] = fitted;
    }
    return run;
}

void cmd_uncertainty(const UncertaintyArgs& a, const Globals& g, std::size_t threads) {
    const std::uint64_t seed = g.seed.value_or(kUncertaintySeed);
    json predictor;
    const auto run = compute_uncertainty(a, seed, threads, &predictor);
    json meta = base_metadata("uncertainty", g, threads);
    meta["config"] = {{"manifest", a.manifest},   {"n_samples", a.n},
                      {"seed", seed},             {"rotation_deg", a.rot},
                      {"translation_px", a.trans}, {"scale", a.scale},
                      {"with_consensus", a.with_consensus}, {"consensus", a.consensus},
                      {"binarize_threshold", 0.5}, {"entropy_unit", "nats"},
                      {"maps_dir", a.maps_dir},     {"export_only", a.export_only}};
    meta["predictor"] = predictor;
    write_file_atomic(a.out, uncertainty_csv(run.rows));
    write_sidecar(a.out, meta);
    if (!a.dice_out.empty()) {
        write_file_atomic(a.dice_out, dice_csv(run.dice));
        write_sidecar(a.dice_out, meta);
    }
    for (const auto& r : run.rows)
        if (!r.mean_entropy_union)
            logger()->warn("uncertainty: {} / {}: empty union, union mean undefined", r.model_id, r.image_id);
    if (a.export_only) logger()->info("uncertainty: inputs exported; rerun without --export-only once predictions exist");
}

// ---------------------------------------------------------------------------

struct ReportArgs {
    std::string style, uncertainty, dice, out, plots_dir;
};

void write_report(const StyleTable& styles, const std::vector<UncertaintyRow>& unc, const std::vector<DiceRow>& dice_rows,
                  const fs::path& out, const fs::path& plots_dir, const json& meta) {
    const Report rep = build_report(styles, unc, dice_rows, meta.dump());
    for (const auto& [name, text] : rep.plot_csvs) write_file_atomic(plots_dir / name, text);
    write_file_atomic(out, rep.json);
    const auto table = consensus_comparison(styles, unc, dice_rows);
    warn_flags(table.flags);
}

void cmd_report(const ReportArgs& a, const Globals& g, std::size_t threads) {
    const auto styles = parse_style_csv(read_file(a.style));
    const auto unc = parse_uncertainty_csv(read_file(a.uncertainty));
    const auto dice_rows = a.dice.empty() ? std::vector<DiceRow>{} : parse_dice_csv(read_file(a.dice));
    json meta = base_metadata("report", g, threads);
    meta["config"] = {{"style", a.style}, {"uncertainty", a.uncertainty}, {"dice", a.dice}, {"plots_dir", a.plots_dir}};
    write_report(styles, unc, dice_rows, a.out, a.plots_dir, meta);
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::vector<std::size_t> geometry{64, 64, 8};
    std::vector<double> spacing{1.0, 1.0, 1.0};
    std::vector<double> radius{5.0, 9.0};
    std::size_t subjects = 20;
    int objects = 3;
    double noise = 0.05;
    std::string raters, preset, out_dir;
};

constexpr std::uint64_t kSimulateSeed = 7;

CohortConfig cohort_config(const SimulateArgs& a, std::uint64_t seed) {
    CohortConfig c;
    c.phantom.geometry = Geometry({a.geometry[0], a.geometry[1], a.geometry[2]}, {a.spacing[0], a.spacing[1], a.spacing[2]});
    c.phantom.n_objects = a.objects;
    c.phantom.radius_mm = {a.radius[0], a.radius[1]};
    c.phantom.noise_sigma = a.noise;
    c.n_subjects = a.subjects;
    c.seed = seed;
    if (!a.raters.empty() && !a.preset.empty()) throw Error("simulate: give either --raters or --preset");
    if (!a.raters.empty()) {
        c.raters = parse_rater_models(read_file(a.raters));
    } else if (a.preset == "paper-shape") {
        c.raters = paper_shape_raters();
    } else if (a.preset.empty()) {
        throw Error("simulate: --raters spec.json or --preset paper-shape is required");
    } else {
        throw Error("unknown preset '" + a.preset + "' (expected paper-shape)");
    }
    return c;
}

json cohort_json(const CohortConfig& c) {
    json raters = json::array();
    for (const auto& r : c.raters)
        raters.push_back({{"rater_id", r.rater_id},       {"center_id", r.center_id},
                          {"center_style", r.center_style}, {"rater_offset", r.rater_offset},
                          {"jitter_sigma", r.jitter_sigma}, {"flip_rate", r.flip_rate}});
    const auto& g = c.phantom.geometry;
    return {{"geometry", g.dims},
            {"spacing_mm", g.spacing},
            {"subjects", c.n_subjects},
            {"objects", c.phantom.n_objects},
            {"radius_mm", {c.phantom.radius_mm.lo, c.phantom.radius_mm.hi}},
            {"noise_sigma", c.phantom.noise_sigma},
            {"supersample", c.phantom.supersample},
            {"seed", c.seed},
            {"raters", raters}};
}

fs::path simulate_into(const CohortConfig& c, const fs::path& out_dir, const json& meta, std::size_t threads) {
    const Cohort cohort = generate_cohort(c, threads);
    write_cohort(cohort, out_dir);
    json m = meta;
    m["config"] = cohort_json(c);
    write_sidecar(out_dir / "manifest.json", m);
    return out_dir / "manifest.json";
}

void cmd_simulate(const SimulateArgs& a, const Globals& g, std::size_t threads) {
    const auto c = cohort_config(a, g.seed.value_or(kSimulateSeed));
    simulate_into(c, a.out_dir, base_metadata("simulate", g, threads), threads);
}

// ---------------------------------------------------------------------------

struct PipelineArgs {
    std::string preset = "paper-shape", out_dir, consensus = "majority", predictor = "synthetic:biased";
    std::size_t subjects = 20, n = 10;
    double rot = 10.0, trans = 3.0, scale = 0.02;
};

void cmd_pipeline(const PipelineArgs& a, const Globals& g, std::size_t threads) {
    const std::uint64_t seed = g.seed.value_or(kSimulateSeed);
    const fs::path out = a.out_dir;
    json meta = base_metadata("pipeline", g, threads);
    meta["config"] = {{"preset", a.preset}, {"seed", seed},        {"subjects", a.subjects}, {"consensus", a.consensus},
                      {"predictor", a.predictor}, {"n_samples", a.n}, {"rotation_deg", a.rot},
                      {"translation_px", a.trans}, {"scale", a.scale}};

    logger()->info("pipeline: simulate");
    SimulateArgs sim;
    sim.preset = a.preset;
    sim.subjects = a.subjects;
    const auto manifest_path = simulate_into(cohort_config(sim, seed), out / "cohort", meta, threads);
    const auto manifest = DatasetManifest::load(manifest_path);

    logger()->info("pipeline: fuse");
    const FusionMethod method = parse_fusion_method(a.consensus);
    for (const auto& s : manifest.subjects()) {
        const auto r = fuse_subset(manifest, s.subject_id, ConsensusScope::global().filter(), method);
        save_volume(out / "consensus" / (s.subject_id + ".rvol"), r.consensus);
        if (!r.converged) logger()->warn("pipeline: STAPLE did not converge on {}", s.subject_id);
    }

    logger()->info("pipeline: style");
    StyleArgs st;
    st.manifest = manifest_path.string();
    st.consensus = a.consensus;
    st.relative = true;
    const StyleTable styles = compute_style(st, threads);
    write_file_atomic(out / "style.csv", style_table_csv(styles));

    logger()->info("pipeline: cluster");
    const auto clusters = cluster_report(style_points(styles));
    write_file_atomic(out / "cluster.json", cluster_report_json(clusters, meta.dump()));

    logger()->info("pipeline: uncertainty");
    UncertaintyArgs ua;
    ua.manifest = manifest_path.string();
    ua.predictor = a.predictor;
    ua.n = a.n;
    ua.rot = a.rot;
    ua.trans = a.trans;
    ua.scale = a.scale;
    ua.with_consensus = true;
    ua.consensus = a.consensus;
    json predictor;
    const auto run = compute_uncertainty(ua, kUncertaintySeed, threads, &predictor);
    meta["predictor"] = predictor;
    write_file_atomic(out / "unc.csv", uncertainty_csv(run.rows));
    write_file_atomic(out / "dice.csv", dice_csv(run.dice));

    logger()->info("pipeline: report");
    write_report(styles, run.rows, run.dice, out / "report.json", out / "plots", meta);
}

}  // namespace

int run(int argc, const char* const* argv) {
    CLI::App app{"Multi-rater segmentation analysis: fusion, rater style, clustering, TTA uncertainty, reports"};
    app.set_version_flag("--version", std::string("raterlab ") + RATERLAB_VERSION);
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--seed", g.seed, "Base seed (uncertainty default 1234, simulate/pipeline default 7)");
    app.add_option("--threads", g.threads, "Worker threads, 0 = all cores; RATERLAB_THREADS overrides");
    app.add_option("--log-level", g.log_level, "trace|debug|info|warn|error|off")
        ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

    FuseArgs fa;
    auto* fuse = app.add_subcommand("fuse", "Fuse the rater masks of one subject");
    fuse->add_option("--manifest", fa.manifest)->required();
    fuse->add_option("--subject", fa.subject)->required();
    fuse->add_option("--method", fa.method)->check(CLI::IsMember({"majority", "staple"}));
    auto* center_opt = fuse->add_option("--center", fa.center, "Fuse only this center's raters");
    fuse->add_option("--raters", fa.raters, "Comma-separated rater ids")->excludes(center_opt);
    fuse->add_option("--out", fa.out)->required();
    fuse->add_option("--posterior", fa.posterior, "STAPLE posterior output");
    fuse->add_option("--tol", fa.tol)->check(CLI::PositiveNumber);
    fuse->add_option("--max-iters", fa.max_iters)->check(CLI::PositiveNumber);

    StyleArgs sa;
    auto* style = app.add_subcommand("style", "Per-rater bias and consistency against a consensus");
    style->add_option("--manifest", sa.manifest)->required();
    style->add_option("--consensus", sa.consensus)->check(CLI::IsMember({"majority", "staple"}));
    style->add_option("--scope", sa.scope, "global | center:<id> | raters:<a>,<b>");
    style->add_option("--out", sa.out)->required();
    style->add_flag("--relative", sa.relative, "Also report count-normalised metrics");
    style->add_flag("--slice-wise", sa.slice_wise, "Treat every slice as an image");

    ClusterArgs ca;
    auto* cluster = app.add_subcommand("cluster", "Center clusters in style space");
    cluster->add_option("--style", ca.style)->required();
    cluster->add_option("--out", ca.out)->required();

    UncertaintyArgs uargs;
    auto* unc = app.add_subcommand("uncertainty", "Test-time augmentation entropy per model and image");
    unc->add_option("--manifest", uargs.manifest)->required();
    unc->add_option("--predictor", uargs.predictor, "precomputed:<dir> | cmd:<argv> | synthetic:<name>");
    unc->add_option("--n", uargs.n, "Monte-Carlo samples")->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    unc->add_option("--rot", uargs.rot, "Rotation range, +- degrees")->check(CLI::NonNegativeNumber);
    unc->add_option("--trans", uargs.trans, "Translation range, +- pixels")->check(CLI::NonNegativeNumber);
    unc->add_option("--scale", uargs.scale, "Scale range, 1 +- value")->check(CLI::Range(0.0, 0.99));
    unc->add_option("--out", uargs.out)->required();
    unc->add_option("--maps-dir", uargs.maps_dir, "Write entropy maps here");
    unc->add_option("--dice-out", uargs.dice_out, "Dice of the untransformed prediction per model and image");
    unc->add_flag("--with-consensus", uargs.with_consensus, "Add center and global consensus models");
    unc->add_option("--consensus", uargs.consensus, "Fusion for consensus models")
        ->check(CLI::IsMember({"majority", "staple"}));
    unc->add_flag("--export-only", uargs.export_only, "precomputed: write inputs only");
    unc->add_option("--sigma", uargs.synthetic.sigma, "synthetic noisy_boundary amplitude");
    unc->add_option("--sigma-base", uargs.synthetic.sigma_base, "synthetic biased amplitude at zero shift");
    unc->add_option("--sigma-gain", uargs.synthetic.sigma_gain, "synthetic biased amplitude growth per pixel of shift");

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Plot-data tables and report.json");
    report->add_option("--style", ra.style)->required();
    report->add_option("--uncertainty", ra.uncertainty)->required();
    report->add_option("--dice", ra.dice);
    report->add_option("--out", ra.out)->required();
    report->add_option("--plots-dir", ra.plots_dir)->required();

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Synthetic phantom cohort with parametric raters");
    simulate->add_option("--geometry", sim.geometry)->delimiter(',')->expected(3);
    simulate->add_option("--spacing", sim.spacing)->delimiter(',')->expected(3);
    simulate->add_option("--subjects", sim.subjects)->check(CLI::PositiveNumber);
    simulate->add_option("--objects", sim.objects)->check(CLI::PositiveNumber);
    simulate->add_option("--radius", sim.radius, "Semi-axis range lo,hi in mm")->delimiter(',')->expected(2);
    simulate->add_option("--noise", sim.noise)->check(CLI::NonNegativeNumber);
    simulate->add_option("--raters", sim.raters, "JSON list of rater models");
    simulate->add_option("--preset", sim.preset)->check(CLI::IsMember({"paper-shape"}));
    simulate->add_option("--out-dir", sim.out_dir)->required();

    PipelineArgs pa;
    auto* pipeline = app.add_subcommand("pipeline", "simulate, fuse, style, cluster, uncertainty and report");
    pipeline->add_option("--preset", pa.preset)->check(CLI::IsMember({"paper-shape"}));
    pipeline->add_option("--out-dir", pa.out_dir)->required();
    pipeline->add_option("--subjects", pa.subjects)->check(CLI::PositiveNumber);
    pipeline->add_option("--consensus", pa.consensus)->check(CLI::IsMember({"majority", "staple"}));
    pipeline->add_option("--predictor", pa.predictor);
    pipeline->add_option("--n", pa.n)->check(CLI::Range(std::size_t{2}, std::size_t{100000}));
    pipeline->add_option("--rot", pa.rot)->check(CLI::NonNegativeNumber);
    pipeline->add_option("--trans", pa.trans)->check(CLI::NonNegativeNumber);
    pipeline->add_option("--scale", pa.scale)->check(CLI::Range(0.0, 0.99));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    auto log = logger();
    log->set_level(spdlog::level::from_str(g.log_level));
    log->set_pattern("raterlab: %l: %v");

    try {
        const std::size_t threads = resolve_threads(g.threads);
        if (*fuse) cmd_fuse(fa, g, threads);
        else if (*style) cmd_style(sa, g, threads);
        else if (*cluster) cmd_cluster(ca, g, threads);
        else if (*unc) cmd_uncertainty(uargs, g, threads);
        else if (*report) cmd_report(ra, g, threads);
        else if (*simulate) cmd_simulate(sim, g, threads);
        else if (*pipeline) cmd_pipeline(pa, g, threads);
    } catch (const Error& e) {
        log->error("{}", e.what());
        return 1;
    } catch (const std::exception& e) {
        log->error("internal error: {}", e.what());
        return 1;
    }
    log->flush();
    return 0;
}

int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace raterlab::cli
