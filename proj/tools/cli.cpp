#include "cli.hpp"

#include "lfr/core.hpp"
#include "lfr/error.hpp"
#include "lfr/image_io.hpp"
#include "lfr/metrics.hpp"
#include "lfr/network.hpp"
#include "lfr/sampling.hpp"
#include "lfr/shear.hpp"
#include "lfr/synth.hpp"
#include "lfr/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace lfr::cli {
namespace {

constexpr const char* kVersion = "1.0.0";
namespace fs = std::filesystem;

// Error raised while a named pipeline stage runs.
struct StageError {
    std::string stage;
    int code;
    std::string message;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const IoError& e) {
        throw StageError{name, kMissingInput, e.what()};
    } catch (const FormatError& e) {
        throw StageError{name, kBadData, e.what()};
    } catch (const InvalidArgument& e) {
        throw StageError{name, kBadData, e.what()};
    } catch (const std::exception& e) {
        throw StageError{name, kFailure, e.what()};
    }
}

void write_provenance(const fs::path& dir, const std::string& command, const std::vector<std::string>& args,
                      nlohmann::json details) {
    nlohmann::json j;
    j["tool"] = "lfr";
    j["version"] = kVersion;
    j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                 std::to_string(EIGEN_MINOR_VERSION);
    j["command"] = command;
    j["args"] = args;
    j["details"] = std::move(details);
    std::ofstream out(dir / "provenance.json");
    if (!out) throw IoError("cannot write provenance in '" + dir.string() + "'");
    out << j.dump(2) << '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

nlohmann::json network_json(const NetworkConfig& n) {
    return {{"blocks_per_section", n.blocks_per_section}, {"filters", n.filters}, {"kernels", n.kernels}};
}

nlohmann::json train_json(const TrainConfig& t) {
    return {{"lr0", t.lr0},
            {"decay", t.decay},
            {"decay_every", t.decay_every},
            {"batch", t.batch},
            {"epochs", t.epochs},
            {"brightness_min", t.brightness_min},
            {"brightness_max", t.brightness_max},
            {"noise_min", t.noise_min},
            {"noise_max", t.noise_max},
            {"augment", t.augment},
            {"beta1", t.beta1},
            {"beta2", t.beta2},
            {"epsilon", t.epsilon},
            {"seed", t.seed}};
}

struct SynthArgs {
    std::string scene;
    std::int64_t random_seed = -1;
    int nu = 45, nv = 1, ns = 64, nt = 64;
    double du = 1.0, f = 1.0, B = 1.0;
    double min_slope = 0.15, max_slope = 1.0;
    std::string out;
};

struct MergeArgs {
    std::vector<std::string> inputs;
    int overlap = 5;
    std::string out;
};

struct SampleArgs {
    std::string input, pattern, out;
};

struct TrainArgs {
    std::vector<std::string> inputs;
    std::string pattern = "A";
    std::string config;
    std::int64_t seed = -1;
    int epochs = 0;
    int crop_width = 64;
    int stride = 16;
    std::string save_dataset;
    std::string out;
};

struct ReconstructArgs {
    std::string input, pattern, method = "network", weights, out;
    double disparity = 0.0;
    bool has_disparity = false;
};

struct EvaluateArgs {
    std::string recon, truth, pattern, method = "unknown", out;
    int margin = 0;
};

struct ExportArgs {
    std::string input, out;
    int v = -1, t = -1;
};

int do_synth(const SynthArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const CameraModel camera{a.f, a.B};
    const LightFieldDims dims{a.nu, a.nv, a.ns, a.nt};
    nlohmann::json details;
    const SceneSpec scene = stage("load scene", [&] {
        if (!a.scene.empty()) {
            details["scene"] = a.scene;
            return load_scene(a.scene);
        }
        RandomSceneOptions o;
        o.nu = a.nu;
        o.nv = a.nv;
        o.ns = a.ns;
        o.nt = a.nt;
        o.du = a.du;
        o.camera = camera;
        o.min_slope = a.min_slope;
        o.max_slope = a.max_slope;
        details["random_seed"] = a.random_seed;
        return random_scene(std::uint64_t(a.random_seed), o);
    });
    const LightField lf = stage("render", [&] { return render_dense_lightfield(scene, camera, dims, a.du); });
    stage("save", [&] {
        save_lightfield(lf, a.out);
        details["layers"] = scene.layers.size();
        write_provenance(a.out, "synth", args, details);
        return 0;
    });
    out << "rendered " << a.nu << "x" << a.nv << " views of " << a.ns << "x" << a.nt << " to " << a.out << '\n';
    return kOk;
}

int do_merge(const MergeArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    std::vector<LightField> chain;
    stage("load", [&] {
        for (const auto& in : a.inputs) chain.push_back(load_lightfield(in));
        return 0;
    });
    const LightField merged = stage("merge", [&] { return merge_lightfields(chain, a.overlap); });
    stage("save", [&] {
        save_lightfield(merged, a.out);
        write_provenance(a.out, "merge", args, {{"inputs", a.inputs}, {"overlap", a.overlap}, {"nu", merged.dims().nu}});
        return 0;
    });
    out << "merged " << chain.size() << " light fields into nu = " << merged.dims().nu << '\n';
    return kOk;
}

int do_sample(const SampleArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const SamplingPattern pattern = SamplingPattern::from_name(a.pattern);
    const LightField dense = stage("load", [&] { return load_lightfield(a.input); });
    const SparseLightField sparse = stage("sample", [&] { return apply_pattern(dense, pattern); });
    stage("save", [&] {
        save_lightfield(sparse.field, a.out);
        write_provenance(a.out, "sample", args,
                         {{"pattern", pattern.name()},
                          {"gap", pattern.gap},
                          {"subfields", dense.dims().nu / SamplingPattern::kSubfieldViews},
                          {"input_subfields", sparse.kept_subfields},
                          {"reconstructed_subfields", sparse.reconstructed_subfields},
                          {"excluded_subfields", sparse.excluded_subfields}});
        return 0;
    });
    out << "pattern " << pattern.name() << ": " << sparse.kept_subfields.size() << " input sub-light-fields, "
        << sparse.reconstructed_subfields.size() << " to reconstruct\n";
    return kOk;
}

int do_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const SamplingPattern pattern = SamplingPattern::from_name(a.pattern);
    NetworkConfig net;
    TrainConfig cfg;
    stage("config", [&] {
        if (!a.config.empty()) read_config_file(a.config, net, cfg);
        if (a.seed >= 0) cfg.seed = std::uint64_t(a.seed);
        if (a.epochs > 0) cfg.epochs = a.epochs;
        cfg.validate();
        return 0;
    });
    std::vector<LightField> fields;
    stage("load", [&] {
        for (const auto& in : a.inputs) fields.push_back(load_lightfield(in));
        return 0;
    });
    const auto dataset =
        stage("dataset", [&] { return build_training_set(fields, pattern, {a.crop_width, a.stride}); });
    out << "training on " << dataset.size() << " window pairs (pattern " << pattern.name() << ")\n";
    ensure_dir(a.out);
    if (!a.save_dataset.empty()) stage("dataset", [&] {
        save_training_set(dataset, pattern, a.save_dataset);
        return 0;
    });
    const TrainResult result = stage("train", [&] {
        return train(dataset, net, cfg, [&](long it, int epoch, double loss, double lr) {
            if (it % 25 == 0) out << "iter " << it << " epoch " << epoch << " lr " << lr << " loss " << loss << '\n';
        });
    });
    stage("save", [&] {
        save_weights(result.params, fs::path(a.out) / "weights.bin");
        write_loss_csv(result, fs::path(a.out) / "loss.csv");
        write_provenance(a.out, "train", args,
                         {{"pattern", pattern.name()},
                          {"pairs", dataset.size()},
                          {"crop_width", a.crop_width},
                          {"stride", a.stride},
                          {"network", network_json(net)},
                          {"train", train_json(cfg)},
                          {"iterations", result.loss.size()}});
        return 0;
    });
    out << "final loss " << result.loss.back() << ", weights written to " << (fs::path(a.out) / "weights.bin")
        << '\n';
    return kOk;
}

int do_reconstruct(const ReconstructArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const SamplingPattern pattern = SamplingPattern::from_name(a.pattern);
    const LightField field = stage("load", [&] { return load_lightfield(a.input); });
    const SparseLightField sparse = stage("load", [&] { return sparse_from_mask(field, pattern); });
    nlohmann::json details{{"pattern", pattern.name()}, {"method", a.method}};

    const LightField recon = stage("reconstruct", [&] {
        if (a.method == "zero-fill") return zero_fill_lightfield(sparse);
        if (a.method == "shear") {
            if (!a.has_disparity) throw InvalidArgument("--method shear needs --disparity");
            details["disparity"] = a.disparity;
            return shear_reconstruct_lightfield(sparse, pattern, DisparityMap::constant(a.disparity));
        }
        if (a.weights.empty()) throw InvalidArgument("--method network needs --weights");
        details["weights"] = a.weights;
        const auto params = load_weights(a.weights);
        return reconstruct_lightfield(sparse, params, pattern);
    });
    stage("save", [&] {
        save_lightfield(recon, a.out);
        write_provenance(a.out, "reconstruct", args, details);
        return 0;
    });
    out << "reconstructed " << sparse.reconstructed_subfields.size() << " sub-light-fields with " << a.method << '\n';
    return kOk;
}

int do_evaluate(const EvaluateArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const SamplingPattern pattern = SamplingPattern::from_name(a.pattern);
    const LightField recon = stage("load", [&] { return load_lightfield(a.recon); });
    const LightField truth = stage("load", [&] { return load_lightfield(a.truth); });
    const auto mask = stage("evaluate", [&] { return apply_pattern(truth, pattern).reconstructed_view_mask(); });
    const EvalReport report = stage("evaluate", [&] {
        return evaluate_reconstruction(recon, truth, mask, {a.margin, a.method, pattern.name()});
    });
    stage("save", [&] {
        ensure_dir(a.out);
        report.write_csv(fs::path(a.out) / "report.csv");
        std::ofstream txt(fs::path(a.out) / "report.txt");
        txt << report.to_text();
        export_error_maps(recon, truth, mask, fs::path(a.out) / "error_maps", a.margin);
        write_provenance(a.out, "evaluate", args,
                         {{"pattern", pattern.name()}, {"method", a.method}, {"margin_columns", a.margin}});
        return 0;
    });
    out << report.to_text();
    return kOk;
}

int do_export(const ExportArgs& a, const std::vector<std::string>& args, std::ostream& out) {
    const LightField lf = stage("load", [&] { return load_lightfield(a.input); });
    int written = 0;
    stage("export", [&] {
        ensure_dir(a.out);
        const auto& d = lf.dims();
        for (int v = 0; v < d.nv; ++v)
            for (int t = 0; t < d.nt; ++t) {
                if ((a.v >= 0 && v != a.v) || (a.t >= 0 && t != a.t)) continue;
                char name[64];
                std::snprintf(name, sizeof name, "epi_v%03d_t%03d.png", v, t);
                write_png(fs::path(a.out) / name, extract_epi(lf, v, t).pixels);
                ++written;
            }
        if (a.v >= d.nv || a.t >= d.nt) throw InvalidArgument("requested (v, t) lies outside the light field");
        write_provenance(a.out, "export-epi", args, {{"written", written}});
        return 0;
    });
    out << "wrote " << written << " EPI images to " << a.out << '\n';
    return kOk;
}

void apply_thread_env() {
#ifdef _OPENMP
    if (const char* env = std::getenv("LFR_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) omp_set_num_threads(n);
    }
#endif
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    apply_thread_env();
    CLI::App app{"Dense light field reconstruction from sparse sampling"};
    app.name("lfr");
    app.require_subcommand(1, 1);
    app.set_version_flag("--version", kVersion);
    const auto patterns = CLI::IsMember({"A", "B", "C"});

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Render a dense light field of a synthetic layered scene");
    auto* scene_opt = s->add_option("--scene", synth.scene, "Scene config (JSON)");
    auto* seed_opt = s->add_option("--random-seed", synth.random_seed, "Render a random layered scene instead");
    scene_opt->excludes(seed_opt);
    s->add_option("--nu", synth.nu)->check(CLI::PositiveNumber);
    s->add_option("--nv", synth.nv)->check(CLI::PositiveNumber);
    s->add_option("--ns", synth.ns)->check(CLI::PositiveNumber);
    s->add_option("--nt", synth.nt)->check(CLI::PositiveNumber);
    s->add_option("--du", synth.du)->check(CLI::PositiveNumber);
    s->add_option("--f", synth.f)->check(CLI::PositiveNumber);
    s->add_option("--B", synth.B)->check(CLI::PositiveNumber);
    s->add_option("--min-slope", synth.min_slope)->check(CLI::PositiveNumber);
    s->add_option("--max-slope", synth.max_slope)->check(CLI::PositiveNumber);
    s->add_option("--out", synth.out)->required();

    MergeArgs merge;
    auto* m = app.add_subcommand("merge", "Fuse a chain of overlapping light fields along u");
    m->add_option("--input", merge.inputs, "Light field directories in chain order")->required();
    m->add_option("--overlap", merge.overlap)->check(CLI::NonNegativeNumber);
    m->add_option("--out", merge.out)->required();

    SampleArgs sample;
    auto* sa = app.add_subcommand("sample", "Apply sampling pattern A, B or C to a dense light field");
    sa->add_option("--input", sample.input)->required();
    sa->add_option("--pattern", sample.pattern)->required()->check(patterns);
    sa->add_option("--out", sample.out)->required();

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Build EPI window pairs and train the residual network");
    t->add_option("--input", tr.inputs, "Dense light field directories")->required();
    t->add_option("--pattern", tr.pattern)->check(patterns);
    t->add_option("--config", tr.config, "JSON with optional network/train objects");
    t->add_option("--seed", tr.seed);
    t->add_option("--epochs", tr.epochs)->check(CLI::PositiveNumber);
    t->add_option("--crop-width", tr.crop_width)->check(CLI::PositiveNumber);
    t->add_option("--stride", tr.stride)->check(CLI::PositiveNumber);
    t->add_option("--save-dataset", tr.save_dataset, "Also write the window pairs to this directory");
    t->add_option("--out", tr.out)->required();

    ReconstructArgs rec;
    auto* r = app.add_subcommand("reconstruct", "Fill the gaps of a sparse light field");
    r->add_option("--input", rec.input)->required();
    r->add_option("--pattern", rec.pattern)->required()->check(patterns);
    r->add_option("--method", rec.method)->check(CLI::IsMember({"network", "shear", "zero-fill"}));
    r->add_option("--weights", rec.weights);
    auto* disp = r->add_option("--disparity", rec.disparity, "Constant disparity for --method shear");
    r->add_option("--out", rec.out)->required();

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "PSNR/SSIM/L1 of a reconstruction over its gap views");
    e->add_option("--recon", ev.recon)->required();
    e->add_option("--truth", ev.truth)->required();
    e->add_option("--pattern", ev.pattern)->required()->check(patterns);
    e->add_option("--method", ev.method, "Label recorded in the report");
    e->add_option("--margin", ev.margin, "Columns excluded on each side")->check(CLI::NonNegativeNumber);
    e->add_option("--out", ev.out)->required();

    ExportArgs ex;
    auto* x = app.add_subcommand("export-epi", "Write EPIs as PNG (rows = views)");
    x->add_option("--input", ex.input)->required();
    x->add_option("--v", ex.v, "Only this v (default: all)")->check(CLI::NonNegativeNumber);
    x->add_option("--t", ex.t, "Only this t (default: all)")->check(CLI::NonNegativeNumber);
    x->add_option("--out", ex.out)->required();

    std::vector<const char*> argv{"lfr"};
    for (const auto& arg : args) argv.push_back(arg.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::Success& ex_) {
        return app.exit(ex_, out, err);
    } catch (const CLI::ParseError& ex_) {
        app.exit(ex_, out, err);
        return kUsage;
    }
    if (s->parsed() && synth.scene.empty() && synth.random_seed < 0) {
        err << "lfr synth: one of --scene or --random-seed is required\n";
        return kUsage;
    }
    rec.has_disparity = disp->count() > 0;

    try {
        if (s->parsed()) return do_synth(synth, args, out);
        if (m->parsed()) return do_merge(merge, args, out);
        if (sa->parsed()) return do_sample(sample, args, out);
        if (t->parsed()) return do_train(tr, args, out);
        if (r->parsed()) return do_reconstruct(rec, args, out);
        if (e->parsed()) return do_evaluate(ev, args, out);
        if (x->parsed()) return do_export(ex, args, out);
    } catch (const StageError& se) {
        err << "lfr " << app.get_subcommands().front()->get_name() << ": " << se.stage << ": " << se.message << '\n';
        return se.code;
    } catch (const std::exception& ex_) {
        err << "lfr: " << ex_.what() << '\n';
        return kFailure;
    }
    return kUsage;
}

} // namespace lfr::cli
