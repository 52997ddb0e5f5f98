#include "raterlab/predictors.hpp"

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <sstream>

#include "raterlab/error.hpp"
#include "raterlab/rvol.hpp"

extern char** environ;

namespace raterlab {

namespace fs = std::filesystem;

Volume plane_volume(const Image2D& img, VolumeKind kind) {
    const Geometry g({img.nx, img.ny, 1}, {1.0, 1.0, 1.0});
    if (kind == VolumeKind::ProbabilityMap) return Volume::probability(g, img.data);
    if (kind == VolumeKind::Intensity) return Volume::intensity(g, img.data);
    throw Error("plane_volume: masks are not supported");
}

Image2D image_of_plane_volume(const Volume& v) {
    if (v.geometry().nz() != 1) throw Error("expected a single-slice volume");
    return plane_of(v, 0);
}

namespace {

std::string stem(const PredictContext& ctx) {
    return "z" + std::to_string(ctx.slice) + (ctx.reference ? "_ref" : "_s" + std::to_string(ctx.sample));
}

Image2D read_prediction(const fs::path& p, const Image2D& input) {
    const Volume v = load_volume(p);
    if (v.kind() != VolumeKind::ProbabilityMap) throw Error(p.string() + ": prediction must have kind \"prob\"");
    Image2D out = image_of_plane_volume(v);
    if (!out.same_shape(input)) throw Error(p.string() + ": prediction shape differs from input");
    return out;
}

}  // namespace

fs::path PrecomputedPredictor::input_path(const PredictContext& ctx) const {
    return dir_ / ctx.model_id / ctx.image_id / (stem(ctx) + "_in.rvol");
}

fs::path PrecomputedPredictor::prediction_path(const PredictContext& ctx) const {
    return dir_ / ctx.model_id / ctx.image_id / (stem(ctx) + "_pred.rvol");
}

Image2D PrecomputedPredictor::predict(const Image2D& input, const PredictContext& ctx) const {
    const fs::path in = input_path(ctx);
    const fs::path pred = prediction_path(ctx);
    if (export_only_) {
        save_volume(in, plane_volume(input, VolumeKind::Intensity));
        return Image2D(input.nx, input.ny, 0.0f);
    }
    if (!fs::exists(pred)) {
        save_volume(in, plane_volume(input, VolumeKind::Intensity));
        throw Error("missing precomputed prediction " + pred.string() + " (input written to " + in.string() + ")");
    }
    return read_prediction(pred, input);
}

SubprocessPredictor::SubprocessPredictor(std::vector<std::string> argv) : argv_(std::move(argv)) {
    if (argv_.empty()) throw Error("subprocess predictor: empty command");
    bool has_in = false, has_out = false;
    for (const auto& a : argv_) {
        has_in |= a.find("{in}") != std::string::npos;
        has_out |= a.find("{out}") != std::string::npos;
    }
    if (!has_in) argv_.push_back("{in}");
    if (!has_out) argv_.push_back("{out}");
}

SubprocessPredictor SubprocessPredictor::from_command_line(const std::string& cmd) {
    std::istringstream is(cmd);
    std::vector<std::string> argv;
    for (std::string tok; is >> tok;) argv.push_back(tok);
    return SubprocessPredictor(std::move(argv));
}

std::string SubprocessPredictor::name() const {
    std::string s = "cmd:";
    for (std::size_t i = 0; i < argv_.size(); ++i) s += (i ? " " : "") + argv_[i];
    return s;
}

Image2D SubprocessPredictor::predict(const Image2D& input, const PredictContext& ctx) const {
    static std::atomic<unsigned long> counter{0};
    const fs::path dir = fs::temp_directory_path() /
                         ("raterlab-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::create_directories(dir);
    const fs::path in = dir / "in.rvol";
    const fs::path out = dir / "out.rvol";
    save_volume(in, plane_volume(input, VolumeKind::Intensity));

    const auto substitute = [&](std::string arg) {
        const std::pair<const char*, std::string> subs[] = {
            {"{in}", in.string()},
            {"{out}", out.string()},
            {"{model}", ctx.model_id},
            {"{image}", ctx.image_id},
            {"{slice}", std::to_string(ctx.slice)},
            {"{sample}", ctx.reference ? std::string("ref") : std::to_string(ctx.sample)},
        };
        for (const auto& [key, val] : subs)
            for (std::size_t pos; (pos = arg.find(key)) != std::string::npos;) arg.replace(pos, std::string(key).size(), val);
        return arg;
    };
    std::vector<std::string> args;
    for (const auto& a : argv_) args.push_back(substitute(a));
    std::vector<char*> cargs;
    for (auto& a : args) cargs.push_back(a.data());
    cargs.push_back(nullptr);

    pid_t pid = 0;
    const int rc = ::posix_spawnp(&pid, cargs[0], nullptr, nullptr, cargs.data(), environ);
    if (rc != 0) {
        fs::remove_all(dir);
        throw Error("cannot start predictor command " + args[0]);
    }
    int status = 0;
    ::waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        fs::remove_all(dir);
        throw Error("predictor command exited with failure status");
    }
    Image2D result;
    try {
        result = read_prediction(out, input);
    } catch (...) {
        fs::remove_all(dir);
        throw;
    }
    fs::remove_all(dir);
    return result;
}

}  // namespace raterlab
