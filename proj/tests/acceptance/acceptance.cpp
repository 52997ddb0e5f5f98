// Acceptance suite: one PASS/FAIL line per criterion.
//   raterlab_acceptance [N]   runs criterion N, or all of them.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "json.hpp"
#include "raterlab/cli.hpp"
#include "raterlab/clustering.hpp"
#include "raterlab/csv.hpp"
#include "raterlab/eval.hpp"
#include "raterlab/fusion.hpp"
#include "raterlab/io.hpp"
#include "raterlab/preprocess.hpp"
#include "raterlab/runner.hpp"
#include "raterlab/simulate.hpp"
#include "raterlab/style.hpp"
#include "raterlab/uncertainty.hpp"
#include "test_support.hpp"

using namespace raterlab;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

void require(Outcome& o, bool ok, const std::string& what) {
    if (!ok) {
        o.pass = false;
        if (!o.detail.empty()) o.detail += "; ";
        o.detail += what;
    }
}

RaterModel rater(std::string id, std::string centre, double style, double offset = 0, double jitter = 0,
                 double flips = 0) {
    return {std::move(id), std::move(centre), style, offset, jitter, flips};
}

// ---------------------------------------------------------------------------

Outcome metrics() {
    Outcome o;
    const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
    const std::vector<CountPair> a{{105, 100}, {57, 50}}, b{{15, 10}, {5, 10}}, r{{110, 100}};
    require(o, near(bias(a), 6.0), "bias {+5,+7}");
    require(o, near(consistency(a), 1.0), "consistency {+5,+7}");
    require(o, near(bias(b), 0.0), "bias {+5,-5}");
    require(o, near(consistency(b), 5.0), "consistency {+5,-5}");
    const auto rb = relative_bias(r);
    require(o, rb.value && near(*rb.value, 0.10), "relative 110 vs 100");
    if (o.pass) o.detail = "bias 6 / consistency 1, bias 0 / consistency 5, relative 0.10";
    return o;
}

long double clampl(long double x) { return std::min(std::max(x, 1e-12L), 1.0L - 1e-12L); }

// Probability-space EM in long double, independent of the library code.
void reference_em(const std::vector<std::vector<int>>& d, std::vector<long double>& w, std::vector<long double>& p,
                  std::vector<long double>& q) {
    const std::size_t r = d.size(), n = d[0].size();
    p.assign(r, 0.99L);
    q.assign(r, 0.99L);
    long double votes = 0;
    for (const auto& row : d)
        for (int v : row) votes += v;
    const long double prior = clampl(votes / (r * n));
    w.assign(n, 0);
    for (int it = 0; it < 100; ++it) {
        long double sw = 0, sc = 0;
        for (std::size_t i = 0; i < n; ++i) {
            long double a = prior, b = 1 - prior;
            for (std::size_t j = 0; j < r; ++j) {
                a *= d[j][i] ? clampl(p[j]) : 1 - clampl(p[j]);
                b *= d[j][i] ? 1 - clampl(q[j]) : clampl(q[j]);
            }
            w[i] = a / (a + b);
            sw += w[i];
            sc += 1 - w[i];
        }
        long double delta = 0;
        for (std::size_t j = 0; j < r; ++j) {
            long double np = 0, nq = 0;
            for (std::size_t i = 0; i < n; ++i) (d[j][i] ? np : nq) += d[j][i] ? w[i] : 1 - w[i];
            np = clampl(np / sw);
            nq = clampl(nq / sc);
            delta = std::max({delta, std::fabs(np - p[j]), std::fabs(nq - q[j])});
            p[j] = np;
            q[j] = nq;
        }
        if (delta < 1e-7L) break;
    }
}

Outcome staple_oracle() {
    Outcome o;
    std::mt19937_64 rng(2024);
    int instances = 0;
    double worst = 0;
    while (instances < 64) {
        const std::size_t nx = 1 + rng() % 4, ny = 1 + rng() % 4, nz = 1 + rng() % 2;
        const std::size_t raters = 2 + rng() % 3;
        const auto truth = testing::random_mask({nx, ny, nz}, 0.5, rng);
        std::bernoulli_distribution flip(0.25);
        std::vector<Volume> masks;
        std::vector<std::vector<int>> rows;
        std::size_t positives = 0;
        for (std::size_t j = 0; j < raters; ++j) {
            std::vector<std::uint8_t> v(truth.mask_values().begin(), truth.mask_values().end());
            for (auto& x : v)
                if (flip(rng)) x = 1 - x;
            for (auto x : v) positives += x;
            rows.emplace_back(v.begin(), v.end());
            masks.push_back(testing::mask_of({nx, ny, nz}, v));
        }
        if (positives == 0 || positives == raters * truth.size()) continue;
        ++instances;
        const auto res = staple(masks);
        std::vector<long double> w, p, q;
        reference_em(rows, w, p, q);
        const auto post = res.posterior->prob_values();
        for (std::size_t i = 0; i < post.size(); ++i) worst = std::max(worst, std::abs(post[i] - double(w[i])));
        for (std::size_t j = 0; j < raters; ++j) {
            worst = std::max(worst, std::abs(res.final_params->sensitivity[j] - double(p[j])));
            worst = std::max(worst, std::abs(res.final_params->specificity[j] - double(q[j])));
        }
    }
    require(o, worst <= 1e-6, fmt::format("max deviation {:.3g}", worst));

    int unanimous = 0;
    for (int t = 0; t < 20; ++t) {
        const auto m = testing::random_mask({4, 4, 2}, 0.4, rng);
        std::vector<Volume> same(2 + t % 3, m);
        StapleParams two;
        two.max_iters = 2;
        const auto res = staple(same, two);
        if (res.consensus == m && res.iterations <= 2) ++unanimous;
    }
    require(o, unanimous == 20, fmt::format("unanimous {}/20", unanimous));
    if (o.pass) o.detail = fmt::format("{} instances, max deviation {:.2g}; unanimous 20/20 within 2 iterations",
                                       instances, worst);
    return o;
}

Outcome majority_rule() {
    Outcome o;
    std::size_t patterns = 0;
    for (int n = 1; n <= 7; ++n)
        for (unsigned bits = 0; bits < (1u << n); ++bits) {
            std::vector<Volume> masks;
            int votes = 0;
            for (int j = 0; j < n; ++j) {
                const std::uint8_t v = (bits >> j) & 1u;
                votes += v;
                masks.push_back(testing::mask_of({1, 1, 1}, {v}));
            }
            const bool got = majority_vote(masks).consensus.value(0) == 1;
            const bool want = 2 * votes >= n;
            require(o, got == want, fmt::format("N={} pattern {:b}", n, bits));
            ++patterns;
        }
    if (o.pass) o.detail = fmt::format("{} vote patterns over N=1..7", patterns);
    return o;
}

Outcome entropy_contract() {
    Outcome o;
    require(o, bernoulli_entropy(0.0) == 0.0 && bernoulli_entropy(1.0) == 0.0, "H(0), H(1)");
    require(o, std::abs(bernoulli_entropy(0.5) - std::numbers::ln2) < 1e-15, "H(0.5)");
    require(o, std::abs(bernoulli_entropy(0.3) - 0.6109) <= 1e-4, "H(0.3)");
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(0, 1);
    for (int t = 0; t < 50; ++t) {
        McStack s;
        for (int k = 0; k < 2 + t % 12; ++k) {
            Image2D img(9, 7);
            for (auto& v : img.data) v = u(rng);
            s.samples.push_back(img);
        }
        for (float h : entropy_map(s).data) require(o, h >= 0.0f && h <= std::numbers::ln2_v<float>, "map range");
        if (!o.pass) break;
    }
    if (o.pass) o.detail = "table exact, 50 random stacks within [0, ln 2]";
    return o;
}

class SmoothThreshold : public Predictor {
public:
    Image2D predict(const Image2D& in, const PredictContext&) const override {
        Image2D out(in.nx, in.ny);
        for (std::size_t i = 0; i < in.data.size(); ++i) out.data[i] = std::clamp((in.data[i] - 0.3f) * 2.5f, 0.f, 1.f);
        return out;
    }
    std::string name() const override { return "ramp"; }
};

Outcome tta_determinism() {
    Outcome o;
    const std::size_t n = 64;
    Image2D plane(n, n);
    for (std::size_t y = 0; y < n; ++y)
        for (std::size_t x = 0; x < n; ++x)
            plane.at(x, y) = static_cast<float>(0.5 + 0.5 * std::sin(x / 7.0) * std::cos(y / 5.0));
    TtaConfig one;
    TtaConfig many = one;
    many.threads = 4;
    const PredictContext ctx{"m", "img", 3, 0, false};
    const auto a = mc_predict(plane, SmoothThreshold(), one, ctx);
    const auto b = mc_predict(plane, SmoothThreshold(), one, ctx);
    const auto c = mc_predict(plane, SmoothThreshold(), many, ctx);
    require(o, a.samples == b.samples, "rerun differs");
    require(o, a.samples == c.samples, "threaded run differs");

    std::mt19937_64 g(77);
    double worst = 0;
    for (int k = 0; k < 50; ++k) {
        const auto t = sample_transform(one.ranges, g);
        const auto r = apply_transform(apply_transform(plane, t, Interp::Bilinear), t.inverse(), Interp::Bilinear);
        const double band = std::ceil(t.max_displacement(n, n));
        double err = 0;
        std::size_t cnt = 0;
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) {
                if (x < band || y < band || x + band >= n || y + band >= n) continue;
                err += std::abs(r.at(x, y) - plane.at(x, y));
                ++cnt;
            }
        worst = std::max(worst, err / cnt);
    }
    require(o, worst < 0.02, fmt::format("round-trip MAE {:.4f}", worst));
    if (o.pass) o.detail = fmt::format("bit-identical across reruns and 1 vs 4 threads; worst round-trip MAE {:.4f}", worst);
    return o;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = (i + j) / 2.0;
        i = j + 1;
    }
    return r;
}

Outcome style_recovery() {
    Outcome o;
    CohortConfig cfg;
    cfg.raters = {rater("a1", "A", 2.5, -1.5), rater("a2", "A", 2.5, -0.5), rater("a3", "A", 2.5, 0.5),
                  rater("a4", "A", 2.5, 1.5),  rater("b1", "B", -2.5, -0.5), rater("b2", "B", -2.5, 0.5),
                  rater("c1", "C", 7.0)};
    const auto cohort = generate_cohort(cfg, 0);
    testing::TempDir dir("acc6");
    const auto manifest = write_cohort(cohort, dir.path());
    StyleOptions opt;
    opt.threads = 0;
    const auto table = style_table(manifest, FusionMethod::Majority, ConsensusScope::global(), opt);

    std::vector<double> injected, measured;
    for (const auto& row : table.rows) {
        const auto it = std::find_if(cfg.raters.begin(), cfg.raters.end(),
                                     [&](const RaterModel& m) { return m.rater_id == row.rater_id; });
        injected.push_back(it->center_style + it->rater_offset);
        measured.push_back(row.bias);
    }
    const double rho = pearson(ranks(injected), ranks(measured));
    require(o, rho == 1.0, fmt::format("Spearman rho {:.4f}", rho));

    const auto report = cluster_report(style_points(table));
    double max_radius = 0, min_dist = INFINITY;
    for (const auto& c : report.clusters) max_radius = std::max(max_radius, c.radius);
    for (const auto& d : report.distances) min_dist = std::min(min_dist, d.distance);
    require(o, max_radius < min_dist, fmt::format("max radius {:.2f} vs min distance {:.2f}", max_radius, min_dist));
    require(o, report.db_index && *report.db_index < 1.0, "DB index");
    if (o.pass)
        o.detail = fmt::format("rho 1.0, max radius {:.1f} < min centroid distance {:.1f}, DB {:.3f}", max_radius,
                               min_dist, *report.db_index);
    return o;
}

Outcome bias_uncertainty() {
    Outcome o;
    CohortConfig cfg;
    cfg.phantom.geometry = Geometry({64, 64, 16}, {1, 1, 1});
    cfg.phantom.radius_mm = {6.0, 10.0};
    for (int s = -3; s <= 3; ++s) {
        const std::string id = fmt::format("style{:+d}", s);
        cfg.raters.push_back(rater(id, "center" + id, s));
    }
    const auto cohort = generate_cohort(cfg, 0);
    testing::TempDir dir("acc7");
    const auto manifest = write_cohort(cohort, dir.path());
    StyleOptions sopt;
    sopt.threads = 0;
    const auto table = style_table(manifest, FusionMethod::Majority, ConsensusScope::global(), sopt);

    UncertaintyRunOptions uopt;
    uopt.tta.n_samples = 10;
    uopt.tta.seed = 1234;
    uopt.tta.threads = 0;
    const auto run = run_uncertainty(manifest, model_specs(manifest, false),
                                     synthetic_factory(manifest, "biased", {}), uopt);
    const auto summaries = summarize_models(table, run.rows, run.dice);
    std::vector<double> x, y;
    for (const auto& row : table.rows)
        for (const auto& s : summaries)
            if (s.spec.model_id == row.rater_id && s.uncertainty) {
                x.push_back(row.bias);
                y.push_back(*s.uncertainty);
            }
    require(o, x.size() == 7, "missing model summaries");
    if (!o.pass) return o;
    const auto fit = ols_r2(x, y);
    require(o, fit.r_squared >= 0.9, fmt::format("R^2 {:.3f}", fit.r_squared));
    require(o, fit.slope > 0, "slope not positive");
    if (o.pass) o.detail = fmt::format("R^2 {:.3f}, slope {:.3g} nats per voxel of bias", fit.r_squared, fit.slope);
    return o;
}

Outcome consensus_smoothing() {
    Outcome o;
    CohortConfig cfg;
    cfg.raters = {rater("p1", "plus", 2, -0.2, 0.5, 0.05),  rater("p2", "plus", 2, 0.2, 0.5, 0.05),
                  rater("m1", "minus", -2, -0.2, 0.5, 0.05), rater("m2", "minus", -2, 0.2, 0.5, 0.05),
                  rater("z1", "zero", 0, -0.2, 0.5, 0.05),   rater("z2", "zero", 0, 0.2, 0.5, 0.05)};
    const auto cohort = generate_cohort(cfg, 0);
    const auto consensus_bias = [&](const std::vector<std::size_t>& who) {
        std::vector<CountPair> pairs;
        for (const auto& s : cohort.subjects) {
            std::vector<Volume> sel;
            for (auto j : who) sel.push_back(s.rater_masks[j]);
            pairs.push_back({positive_count(majority_vote(sel).consensus), positive_count(s.phantom.true_mask)});
        }
        return bias(pairs);
    };
    const double global = consensus_bias({0, 1, 2, 3, 4, 5});
    const double plus = consensus_bias({0, 1}), minus = consensus_bias({2, 3}), zero = consensus_bias({4, 5});
    const double best = std::min({std::abs(plus), std::abs(minus), std::abs(zero)});
    require(o, std::abs(global) <= best,
            fmt::format("global {:.1f} vs centers {:.1f} / {:.1f} / {:.1f}", global, plus, minus, zero));
    if (o.pass)
        o.detail = fmt::format("|global| {:.1f} <= min center |bias| {:.1f} (centers {:+.1f}, {:+.1f}, {:+.1f})",
                               std::abs(global), best, plus, minus, zero);
    return o;
}

Outcome dice_r2() {
    Outcome o;
    const auto a = testing::mask_of({4, 1, 1}, {1, 1, 0, 0});
    const auto b = testing::mask_of({4, 1, 1}, {0, 0, 1, 1});
    const auto h = testing::mask_of({4, 1, 1}, {0, 1, 1, 0});
    require(o, dice(a, a) == 1.0, "identity");
    require(o, dice(a, b) == 0.0, "disjoint");
    require(o, dice(a, h) == 0.5, "half overlap");
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd(0, 1);
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        std::vector<double> x(3 + t % 30), y(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            x[i] = nd(rng);
            y[i] = (t % 7) * 0.3 * x[i] + nd(rng);
        }
        const double r = pearson(x, y);
        worst = std::max(worst, std::abs(ols_r2(x, y).r_squared - r * r));
    }
    require(o, worst <= 1e-12, fmt::format("R^2 vs Pearson^2 {:.3g}", worst));
    if (o.pass) o.detail = fmt::format("dice exact; max |R^2 - r^2| {:.2g} over 100 instances", worst);
    return o;
}

Outcome pipeline_end_to_end() {
    Outcome o;
    testing::TempDir dir("acc10");
    const std::string a = (dir / "a").string(), b = (dir / "b").string();
    require(o, cli::run({"raterlab", "--seed", "7", "pipeline", "--preset", "paper-shape", "--out-dir", a}) == 0,
            "first run failed");
    require(o, cli::run({"raterlab", "--seed", "7", "pipeline", "--preset", "paper-shape", "--out-dir", b}) == 0,
            "second run failed");
    if (!o.pass) return o;

    const char* plots[] = {"fig1_style.csv", "fig2_unc_vs_bias.csv", "fig4_dice_vs_bias.csv", "fig5_consensus.csv",
                           "table1_dice.csv", "fig7_per_center.csv"};
    for (const char* p : plots) {
        const fs::path f = fs::path(a) / "plots" / p;
        require(o, fs::exists(f), fmt::format("missing {}", p));
        if (!fs::exists(f)) continue;
        const auto rows = csv::parse(read_file(f));
        require(o, rows.size() >= 2, fmt::format("{} has no data rows", p));
        for (const auto& r : rows) require(o, r.size() == rows[0].size(), fmt::format("{} ragged", p));
    }
    try {
        const auto j = nlohmann::json::parse(read_file(fs::path(a) / "report.json"));
        for (const char* k : {"metadata", "entropy_unit", "regressions", "comparison", "per_center", "plot_files"})
            require(o, j.contains(k), fmt::format("report.json lacks {}", k));
        for (const char* k : {"uncertainty_vs_bias", "dice_vs_bias"})
            require(o, j["regressions"].contains(k) && j["regressions"][k].contains("r_squared"),
                    fmt::format("regression {}", k));
        require(o, j["metadata"]["config"]["seed"] == 7, "seed not echoed");
    } catch (const std::exception& e) {
        require(o, false, std::string("report.json: ") + e.what());
    }

    std::size_t files = 0;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a);
        const fs::path other = fs::path(b) / rel;
        require(o, fs::exists(other) && read_file(e.path()) == read_file(other),
                fmt::format("{} differs between runs", rel.string()));
        ++files;
    }
    std::size_t files_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file();
    require(o, files == files_b, "file sets differ");
    if (o.pass) o.detail = fmt::format("6 plot CSVs + report.json; {} files byte-identical across reruns", files);
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> all = {
        {1, "metric correctness", 1, metrics},
        {2, "STAPLE oracle equivalence", 30, staple_oracle},
        {3, "majority-vote rule", 1, majority_rule},
        {4, "entropy contract", 1, entropy_contract},
        {5, "TTA determinism and round trip", 10, tta_determinism},
        {6, "style recovery", 120, style_recovery},
        {7, "bias-uncertainty correlation", 300, bias_uncertainty},
        {8, "consensus bias smoothing", 120, consensus_smoothing},
        {9, "Dice and R^2 identities", 1, dice_r2},
        {10, "end-to-end pipeline", 600, pipeline_end_to_end},
    };
    int only = 0;
    if (argc > 1) only = std::atoi(argv[1]);
    int failures = 0;
    for (const auto& c : all) {
        if (only && c.id != only) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs >= c.limit_s) {
            o.pass = false;
            o.detail += fmt::format("{}over the {:.0f} s limit", o.detail.empty() ? "" : "; ", c.limit_s);
        }
        std::printf("%s criterion %d (%s): %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures ? 1 : 0;
}
