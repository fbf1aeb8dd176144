// hgnet: synthetic data, training, evaluation and diagnostics for stacked hourglass networks.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "hg/eval.hpp"
#include "hg/gradsuite.hpp"
#include "hg/io.hpp"
#include "hg/synth.hpp"
#include "hg/training.hpp"
#include "json.hpp"

using namespace hg;

namespace {

std::uint64_t default_seed() {
    if (const char* s = std::getenv("HG_SEED")) {
        try {
            return std::stoull(s);
        } catch (const std::exception&) {
            std::cerr << "warning: ignoring unparsable HG_SEED=" << s << "\n";
        }
    }
    return 1;
}

std::string pct(std::optional<double> v) {
    if (!v) return "-";
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100 * *v);
    return buf;
}

// ---- synth

struct SynthArgs {
    int count = 16;
    int size = 64;
    std::uint64_t seed = 1;
    std::string out = "data";
    double occlusion = 0;
    double truncation = 0;
    int distractors = 3;
};

int cmd_synth(const SynthArgs& a) {
    SynthOptions opt;
    opt.image_size = a.size;
    opt.seed = a.seed;
    opt.occlusion_probability = a.occlusion;
    opt.truncation_probability = a.truncation;
    opt.max_distractors = a.distractors;
    if (a.count < 1) throw std::invalid_argument("--count must be at least 1");
    const SkeletonSpec spec = SkeletonSpec::standard();
    const Dataset d = generate(spec, static_cast<std::size_t>(a.count), opt);
    const fs::path path = export_dataset(d, a.out);
    std::size_t joints = 0, present = 0, visible = 0;
    for (const auto& s : d.samples)
        for (std::size_t k = 0; k < s.annotation.num_joints(); ++k) {
            ++joints;
            present += s.annotation.present[k];
            visible += s.annotation.visible[k];
        }
    std::cout << "wrote " << d.size() << " samples (" << a.size << "x" << a.size << ", " << d.header.num_joints()
              << " joints, seed " << a.seed << ") to " << path.string() << "\n"
              << "joints present " << present << "/" << joints << ", visible " << visible << "/" << joints << "\n";
    return 0;
}

// ---- train

struct TrainArgs {
    std::string config;
    std::string data;
    std::string val;
    std::string out;
    std::string resume;
    long iterations = 0;
    int workers = 0;
    bool deterministic = false;
    bool no_intermediate = false;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

ExperimentConfig experiment_from(const TrainArgs& a) {
    ExperimentConfig e;
    if (!a.config.empty()) e = read_experiment_config(a.config);
    else e.seed = e.train.seed = default_seed();
    if (!a.data.empty()) e.train_data = a.data;
    if (!a.val.empty()) e.validation_data = a.val;
    if (!a.out.empty()) e.output_dir = a.out;
    if (a.iterations > 0) e.train.max_iterations = a.iterations;
    if (a.workers > 0) e.train.workers = a.workers;
    if (a.deterministic) e.train.workers = 1;
    if (a.no_intermediate) e.train.intermediate_supervision = false;
    if (a.seed_set) e.seed = e.train.seed = a.seed;
    if (e.train_data.empty()) throw std::invalid_argument("no training data: pass --data or set train_data");
    e.train.validate();
    return e;
}

int cmd_train(const TrainArgs& a) {
    const ExperimentConfig e = experiment_from(a);
    const Dataset train = load_dataset(e.train_data);
    const Dataset val = e.validation_data.empty() ? Dataset{} : load_dataset(e.validation_data);
    const Dataset& validation = e.validation_data.empty() ? train : val;

    StackedModelParams<float> model;
    std::optional<Checkpoint> resumed;
    if (!a.resume.empty()) {
        resumed = load_checkpoint(a.resume);
        if (!resumed->trainer) throw IoError("checkpoint " + a.resume + " has no training state to resume from");
        model = std::move(resumed->model);
    } else {
        ModelConfig mc = e.model;
        mc.num_joints = train.header.num_joints();
        model = init_params<float>(mc, e.seed);
    }

    Trainer trainer(model, train, validation, e.train);
    if (resumed) {
        trainer.optimizer() = resumed->optimizer;
        trainer.restore(*resumed->trainer);
    }

    const fs::path out = e.output_dir;
    fs::create_directories(out);
    write_text(out / "config.json", experiment_config_to_json(e) + "\n");
    const fs::path log_path = out / "log.csv";
    const bool append = resumed && fs::exists(log_path);
    std::ofstream log(log_path, append ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (!append) log << training_log_header(model.config.num_stacks);

    std::cout << "training " << model.parameter_count() << " parameters on " << train.size() << " samples, "
              << "validating on " << validation.size() << "\n";
    TrainCallbacks cb;
    cb.on_log = [&](const LogRow& row) {
        log << training_log_row(row) << std::flush;
        std::cout << "iter " << row.iteration << "  lr " << format_number(row.lr) << "  loss "
                  << format_number(row.train_loss) << "  val";
        for (const auto& acc : row.stack_accuracy) std::cout << " " << pct(acc);
        std::cout << std::endl;
    };
    cb.on_checkpoint = [&](long) {
        save_checkpoint(out / "checkpoint.hgnet", model, &trainer.optimizer(), &trainer.state(), &trainer.config());
    };
    const TrainResult r = trainer.run(cb);
    std::cout << (r.reached_target ? "reached target accuracy at iteration " : "stopped at iteration ")
              << trainer.state().iteration << "; checkpoint " << (out / "checkpoint.hgnet").string() << "\n";
    return 0;
}

// ---- eval

struct EvalArgs {
    std::string checkpoint;
    std::string data;
    std::string out = "eval";
    std::string svg;
    bool flip = false;
    bool oracle = false;
    double threshold = 0.5;
};

int cmd_eval(const EvalArgs& a) {
    const Dataset data = load_dataset(a.data);
    std::vector<PosePrediction> preds;
    if (a.oracle) {
        ModelConfig mc = ModelConfig::desk_scale(data.header.num_joints());
        if (!a.checkpoint.empty()) mc = load_checkpoint(a.checkpoint).model.config;
        preds = predict_from_targets(data, mc);
    } else {
        if (a.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required unless --oracle-targets is set");
        Checkpoint ck = load_checkpoint(a.checkpoint);
        if (ck.model.config.num_joints != data.header.num_joints())
            throw std::invalid_argument("checkpoint predicts " + std::to_string(ck.model.config.num_joints) +
                                        " joints, dataset has " + std::to_string(data.header.num_joints()));
        PredictOptions opt;
        opt.flip = a.flip;
        preds = predict_dataset(ck.model, data, opt).back();
    }
    std::vector<Annotation> anns;
    for (const auto& s : data.samples) anns.push_back(s.annotation);
    const auto thresholds = default_thresholds();
    const EvalReport report = build_report(data.header, anns, preds, a.threshold, thresholds);
    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "report.csv", eval_report_csv(report));
    const std::string table = summary_table(report);
    write_text(fs::path(a.out) / "summary.txt", table);
    if (!a.svg.empty()) write_text(a.svg, pck_curve_svg(report, "PCK on " + fs::path(a.data).parent_path().filename().string()));
    std::cout << table;
    return 0;
}

// ---- ablate

struct AblateArgs {
    std::string config;
    std::string variants = "8x1,4x2,2x4";
    std::string out = "ablation";
    long iterations = 0;
    bool paper_scale = false;
};

struct Variant {
    int stacks = 1;
    int modules = 1;
    bool intermediate = true;
    std::string label;
};

std::vector<Variant> parse_variants(const std::string& text) {
    std::vector<Variant> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        Variant v;
        v.label = item;
        std::string body = item;
        const std::string suffix = "-noint";
        if (body.size() > suffix.size() && body.ends_with(suffix)) {
            v.intermediate = false;
            body.resize(body.size() - suffix.size());
        }
        const auto x = body.find('x');
        try {
            if (x == std::string::npos) throw std::invalid_argument("");
            v.stacks = std::stoi(body.substr(0, x));
            v.modules = std::stoi(body.substr(x + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("variant \"" + item + "\" is not of the form <stacks>x<modules>[-noint]");
        }
        if (v.stacks < 1 || v.modules < 1) throw std::invalid_argument("variant \"" + item + "\" must be positive");
        out.push_back(v);
    }
    if (out.empty()) throw std::invalid_argument("no variants given");
    return out;
}

int cmd_ablate(const AblateArgs& a) {
    ExperimentConfig e;
    if (!a.config.empty()) e = read_experiment_config(a.config);
    if (a.paper_scale) e.model = ModelConfig::paper_scale(e.model.num_joints);
    if (a.iterations > 0) e.train.max_iterations = a.iterations;
    const auto variants = parse_variants(a.variants);

    std::vector<std::size_t> counts;
    for (const auto& v : variants) {
        ModelConfig mc = e.model;
        mc.num_stacks = v.stacks;
        mc.modules_per_location = v.modules;
        counts.push_back(parameter_count(mc));
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    const double spread = static_cast<double>(*hi - *lo) / static_cast<double>(*lo);
    std::cout << "parameter counts (" << e.model.num_features << " features, depth " << e.model.hourglass_depth
              << "):\n";
    for (std::size_t i = 0; i < variants.size(); ++i)
        std::cout << "  " << variants[i].label << "  " << counts[i] << "\n";
    std::printf("largest relative difference %.2f%%\n", 100 * spread);
    if (spread > 0.10) std::cout << "WARNING: parameter counts differ by more than 10%\n";

    fs::create_directories(a.out);
    std::ofstream csv(fs::path(a.out) / "ablation.csv");
    csv << "variant,num_stacks,modules_per_location,intermediate_supervision,parameters,final_acc,midpoint_acc,"
           "stack_accs\n";
    const bool train_them = a.iterations > 0;
    std::optional<Dataset> train, val;
    if (train_them) {
        if (e.train_data.empty()) throw std::invalid_argument("ablation training needs train_data in the config");
        train = load_dataset(e.train_data);
        if (!e.validation_data.empty()) val = load_dataset(e.validation_data);
    }
    for (std::size_t i = 0; i < variants.size(); ++i) {
        const Variant& v = variants[i];
        std::vector<std::optional<double>> accs;
        if (train_them) {
            ModelConfig mc = e.model;
            mc.num_stacks = v.stacks;
            mc.modules_per_location = v.modules;
            mc.num_joints = train->header.num_joints();
            auto model = init_params<float>(mc, e.seed);
            TrainConfig tc = e.train;
            tc.intermediate_supervision = v.intermediate;
            Trainer trainer(model, *train, val ? *val : *train, tc);
            const TrainResult r = trainer.run();
            accs = r.log.back().stack_accuracy;
            std::cout << v.label << ": final " << pct(accs.back()) << "\n";
        }
        std::string mid, fin, all;
        if (!accs.empty()) {
            fin = format_number(accs.back());
            // "Halfway through the network": the last stack of the first half.
            if (v.stacks >= 2) mid = format_number(accs[static_cast<std::size_t>(v.stacks / 2 - 1)]);
            for (std::size_t s = 0; s < accs.size(); ++s) all += (s ? ";" : "") + format_number(accs[s]);
        }
        csv << v.label << "," << v.stacks << "," << v.modules << "," << (v.intermediate ? 1 : 0) << "," << counts[i]
            << "," << fin << "," << mid << "," << all << "\n";
    }
    std::cout << "wrote " << (fs::path(a.out) / "ablation.csv").string() << "\n";
    return 0;
}

// ---- gradcheck

int cmd_gradcheck(std::uint64_t seed) {
    bool ok = true;
    for (const auto& e : run_gradient_suite(seed)) {
        std::size_t probed = 0, skipped = 0;
        for (const auto& in : e.report.inputs) {
            probed += in.probed;
            skipped += in.skipped_kinks;
        }
        const bool pass = e.report.passed();
        ok = ok && pass;
        std::printf("%-4s %-40s max rel error %.3e  (%zu probes, %zu near kinks skipped)\n", pass ? "ok" : "FAIL",
                    e.op.c_str(), e.report.max_rel_error(), probed, skipped);
        if (!pass)
            for (const auto& in : e.report.inputs)
                if (!in.passed())
                    std::printf("       %s: %zu failed, %zu non-finite, max rel error %.3e\n", in.name.c_str(),
                                in.failed, in.non_finite, in.max_rel_error);
    }
    std::cout << (ok ? "all gradient checks passed\n" : "gradient checks FAILED\n");
    return ok ? 0 : 1;
}

// ---- predict

struct PredictArgs {
    std::string checkpoint;
    std::string image;
    std::vector<double> center;
    double scale = 0;
    std::string heatmaps;
    std::string out;
};

int cmd_predict(const PredictArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    const ImageU8 image = read_png(a.image);
    const ModelConfig& mc = ck.model.config;
    const CropResult crop = crop_and_resize(image, {a.center.at(0), a.center.at(1)}, a.scale, mc.input_resolution);
    const std::size_t in_res = static_cast<std::size_t>(mc.input_resolution);
    TensorF x(Shape{1, 3, in_res, in_res}, crop.pixels);
    Graph<float> g(false);
    const TensorF heat = stacked_forward(g, x, ck.model, Mode::eval).back();
    const PosePrediction pose =
        decode_pose(heat.data(), mc.num_joints, mc.output_resolution, mc.input_resolution, crop.original_to_crop);

    nlohmann::ordered_json j;
    j["image"] = a.image;
    j["center"] = a.center;
    j["scale"] = a.scale;
    j["joints"] = nlohmann::ordered_json::array();
    for (const auto& p : pose)
        j["joints"].push_back({{"x", p.position.x},
                               {"y", p.position.y},
                               {"max_activation", p.max_activation},
                               {"mean_activation", p.mean_activation}});
    const std::string text = j.dump(2) + "\n";
    if (a.out.empty()) std::cout << text;
    else write_text(a.out, text);

    if (!a.heatmaps.empty()) {
        nlohmann::ordered_json h;
        const auto& shape = heat.shape();
        h["shape"] = {shape[1], shape[2], shape[3]};
        h["values"] = std::vector<float>(heat.data().begin(), heat.data().end());
        write_text(a.heatmaps, h.dump() + "\n");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stacked hourglass keypoint estimation toolkit"};
    app.require_subcommand(1);

    SynthArgs synth;
    synth.seed = default_seed();
    auto* s = app.add_subcommand("synth", "Generate a synthetic articulated-figure dataset");
    s->add_option("--count", synth.count, "Number of samples")->capture_default_str();
    s->add_option("--size", synth.size, "Image side in pixels")->capture_default_str();
    s->add_option("--seed", synth.seed, "Generator seed (default: $HG_SEED or 1)");
    s->add_option("--out", synth.out, "Output directory")->capture_default_str();
    s->add_option("--occlusion", synth.occlusion, "Per-sample occlusion probability")->check(CLI::Range(0.0, 1.0));
    s->add_option("--truncation", synth.truncation, "Per-sample truncation probability")->check(CLI::Range(0.0, 1.0));
    s->add_option("--distractors", synth.distractors, "Maximum distractor shapes")->capture_default_str();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a model");
    t->add_option("--config", train.config, "Experiment config (JSON)");
    t->add_option("--data", train.data, "Training annotation file");
    t->add_option("--val", train.val, "Validation annotation file (default: the training set)");
    t->add_option("--out", train.out, "Output directory");
    t->add_option("--iterations", train.iterations, "Override max_iterations");
    t->add_option("--workers", train.workers, "Data preparation threads");
    t->add_option("--resume", train.resume, "Continue from a checkpoint");
    t->add_flag("--deterministic", train.deterministic, "Serial data preparation");
    t->add_flag("--no-intermediate", train.no_intermediate, "Supervise only the final stack");
    auto* seed_opt = t->add_option("--seed", train.seed, "Seed for initialization and sampling");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint");
    e->add_option("--data", ev.data, "Annotation file")->required();
    e->add_option("--out", ev.out, "Report directory")->capture_default_str();
    e->add_option("--svg", ev.svg, "Write PCK curves as SVG");
    e->add_option("--threshold", ev.threshold, "Reference PCK threshold")->capture_default_str();
    e->add_flag("--flip", ev.flip, "Average with the mirrored input");
    e->add_flag("--oracle-targets", ev.oracle, "Score rendered ground-truth heatmaps instead of a model");

    AblateArgs ab;
    auto* b = app.add_subcommand("ablate", "Compare stack/module arrangements of similar size");
    b->add_option("--config", ab.config, "Experiment config; its data and train settings are used for every variant");
    b->add_option("--variants", ab.variants, "Comma-separated <stacks>x<modules>[-noint]")->capture_default_str();
    b->add_option("--iterations", ab.iterations, "Training budget per variant (0: counts only)");
    b->add_option("--out", ab.out, "Output directory")->capture_default_str();
    b->add_flag("--paper-scale", ab.paper_scale, "Count parameters at 256 features, depth 4");

    std::uint64_t gc_seed = default_seed();
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
    gc->add_option("--seed", gc_seed, "Input seed");

    PredictArgs pr;
    auto* p = app.add_subcommand("predict", "Predict keypoints on one image");
    p->add_option("--checkpoint", pr.checkpoint, "Model checkpoint")->required();
    p->add_option("--image", pr.image, "PNG image")->required();
    p->add_option("--center", pr.center, "Person center x y")->expected(2)->required();
    p->add_option("--scale", pr.scale, "Person scale (window side / 200 px)")->required();
    p->add_option("--heatmaps", pr.heatmaps, "Dump final-stack heatmaps (JSON, K x R x R)");
    p->add_option("--out", pr.out, "Write keypoints JSON here instead of stdout");

    CLI11_PARSE(app, argc, argv);
    train.seed_set = seed_opt->count() > 0;

    try {
        if (*s) return cmd_synth(synth);
        if (*t) return cmd_train(train);
        if (*e) return cmd_eval(ev);
        if (*b) return cmd_ablate(ab);
        if (*gc) return cmd_gradcheck(gc_seed);
        if (*p) return cmd_predict(pr);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 1;
}
