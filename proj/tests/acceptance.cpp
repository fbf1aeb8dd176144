// End-to-end checks, one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 4 5        run only the listed ones
//
// Exit status is nonzero when any selected criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "hg/eval.hpp"
#include "hg/gradsuite.hpp"
#include "hg/io.hpp"
#include "hg/synth.hpp"
#include "hg/training.hpp"

using namespace hg;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string pct(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", 100 * *v);
    return buf;
}

Dataset synth(std::size_t n, std::uint64_t seed) {
    SynthOptions o;
    o.seed = seed;
    return generate(SkeletonSpec::standard(), n, o);
}

template <typename T>
std::vector<T> values(const Tensor<T>& t) {
    return {t.data().begin(), t.data().end()};
}

// ---- 1

Outcome gradient_suite() {
    const auto t0 = Clock::now();
    const auto entries = run_gradient_suite(7);
    const double secs = seconds_since(t0);
    bool ok = secs < 120;
    double worst = 0;
    std::string failed;
    std::set<std::string> covered;
    for (const auto& e : entries) {
        worst = std::max(worst, e.report.max_rel_error());
        if (!e.report.passed()) {
            ok = false;
            failed += " " + e.op;
        }
        covered.insert(e.op.substr(0, e.op.find(' ')));
    }
    for (const char* op : {"conv2d", "maxpool2x2", "upsample_nearest2x", "batchnorm", "relu", "add", "mse_loss"}) {
        bool found = false;
        for (const auto& c : covered) found = found || c.rfind(op, 0) == 0;
        if (!found) {
            ok = false;
            failed += std::string(" missing:") + op;
        }
    }
    bool model_checked = false;
    for (const auto& e : entries) model_checked = model_checked || e.op.find("hourglass") != std::string::npos;
    ok = ok && model_checked;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%zu checks, worst max rel error %.2e (limit 1e-4), %.1f s%s", entries.size(), worst,
                  secs, model_checked ? "" : ", no model check");
    return {ok, buf + (failed.empty() ? "" : "; failed:" + failed)};
}

// ---- 2

Outcome shapes() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<float> u(-1, 1);
    auto random = [&](Shape s) {
        std::vector<float> v(shape_numel(s));
        for (auto& x : v) x = u(rng);
        return TensorF(std::move(s), std::move(v));
    };
    std::vector<std::string> problems;
    for (int features : {8, 64, 256})
        for (int depth = 1; depth <= 4; ++depth) {
            ModelConfig c;
            c.num_stacks = 1;
            c.num_features = features;
            c.hourglass_depth = depth;
            c.input_resolution = 64;
            c.output_resolution = 16;
            auto m = init_params<float>(c, 1);
            Graph<float> g(false);
            const TensorF x = random({2, std::size_t(features), 16, 16});
            if (hourglass_forward(g, x, m.stacks[0].hourglass, Mode::train).shape() != x.shape())
                problems.push_back("hourglass F" + std::to_string(features) + " d" + std::to_string(depth));
        }

    const ModelConfig paper = ModelConfig::paper_scale(16);
    auto big = init_params<float>(paper, 3);
    Graph<float> g(false);
    const TensorF image = random({1, 3, 256, 256});
    const auto heat = stacked_forward(g, image, big, Mode::train);
    if (heat.size() != 8) problems.push_back("paper model returned " + std::to_string(heat.size()) + " stacks");
    for (const auto& h : heat)
        if (h.shape() != Shape{1, 16, 64, 64}) problems.push_back("paper heatmap shape");
    std::size_t smallest = 1u << 30;
    for (const auto& t : g.trace())
        if (t.output_shape.size() == 4) smallest = std::min<std::size_t>(smallest, t.output_shape[2]);
    bool stem_ok = true;
    {
        Graph<float> s(false);
        stem_ok = stem_forward(s, image, big.stem, Mode::train).shape() == Shape{1, 256, 64, 64};
        auto desk = init_params<float>(ModelConfig::desk_scale(), 4);
        stem_ok = stem_ok &&
                  stem_forward(s, random({1, 3, 64, 64}), desk.stem, Mode::train).shape() == Shape{1, 64, 16, 16};
        for (int stacks : {1, 2, 3}) {
            ModelConfig c = ModelConfig::desk_scale();
            c.num_stacks = stacks;
            auto m = init_params<float>(c, 5);
            if (stacked_forward(s, random({2, 3, 64, 64}), m, Mode::train).size() != std::size_t(stacks))
                problems.push_back("stack count " + std::to_string(stacks));
        }
    }
    if (!stem_ok) problems.push_back("stem shapes");
    if (smallest != 4 || paper.innermost_resolution() != 4)
        problems.push_back("innermost resolution " + std::to_string(smallest));
    std::string detail = "12 hourglass configs, stems 256->64 and 64->16, 8 paper-scale stacks, innermost " +
                         std::to_string(smallest) + "x" + std::to_string(smallest);
    for (const auto& p : problems) detail += "; " + p;
    return {problems.empty(), detail};
}

// ---- 3

Outcome equal_parameters() {
    ModelConfig c = ModelConfig::paper_scale(16);
    std::vector<std::size_t> counts;
    std::string detail;
    for (auto [s, m] : {std::pair{8, 1}, {4, 2}, {2, 4}}) {
        c.num_stacks = s;
        c.modules_per_location = m;
        counts.push_back(parameter_count(c));
        // The analytic count must agree with an instantiated model.
        if (s == 2 && init_params<float>(c, 1).parameter_count() != counts.back()) return {false, "count mismatch"};
        detail += std::to_string(s) + "x" + std::to_string(m) + "=" + std::to_string(counts.back()) + " ";
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    const double spread = double(*hi - *lo) / double(*lo);
    char buf[64];
    std::snprintf(buf, sizeof buf, "spread %.2f%% (limit 5%%)", 100 * spread);
    return {spread <= 0.05, detail + buf};
}

// ---- 4

Outcome overfit() {
    const Dataset d = synth(16, 1);
    ModelConfig mc = ModelConfig::desk_scale(d.header.num_joints());
    auto model = init_params<float>(mc, 1);
    TrainConfig tc;
    tc.augment = false;
    tc.batch_size = 8;
    tc.max_iterations = 2000;
    tc.eval_interval = 100;
    tc.stop_at_accuracy = 1.0;
    tc.seed = 1;
    Trainer trainer(model, d, d, tc);
    const auto t0 = Clock::now();
    std::cout << "  [4] " << training_log_header(mc.num_stacks);
    const TrainResult r = trainer.run({[](const LogRow& row) { std::cout << "  [4] " << training_log_row(row); },
                                       nullptr});
    const double secs = seconds_since(t0);
    const auto& last = r.log.back();
    std::string detail = "training PCK@0.5 by stack:";
    for (const auto& a : last.stack_accuracy) detail += " " + pct(a);
    char buf[96];
    std::snprintf(buf, sizeof buf, " at iteration %ld, %.0f s", last.iteration, secs);
    return {last.stack_accuracy.back() == 1.0 && last.iteration <= 2000 && secs < 1800, detail + buf};
}

// ---- 5

Outcome generalization() {
    const Dataset train = synth(500, 11), val = synth(100, 12);
    std::string detail;
    bool ok = true;
    for (bool intermediate : {true, false}) {
        auto model = init_params<float>(ModelConfig::desk_scale(train.header.num_joints()), 1);
        TrainConfig tc;
        tc.batch_size = 8;
        tc.max_iterations = 20000;
        tc.eval_interval = 250;
        tc.stop_at_accuracy = 0.9;
        tc.intermediate_supervision = intermediate;
        tc.seed = 1;
        Trainer trainer(model, train, val, tc);
        const std::string tag = intermediate ? "  [5 int] " : "  [5 final-only] ";
        std::cout << tag << training_log_header(2);
        const TrainResult r = trainer.run({[&](const LogRow& row) { std::cout << tag << training_log_row(row); },
                                           nullptr});
        const auto& last = r.log.back();
        ok = ok && r.reached_target;
        detail += std::string(intermediate ? "intermediate supervision: " : "; final stack only: ") +
                  pct(last.stack_accuracy.back()) + " at iteration " + std::to_string(last.iteration);
    }
    return {ok, detail + " (target 90% within 20000)"};
}

// ---- 6

Outcome decoder_oracle() {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(3.0, 61.0);
    double worst = 0, sum_offset = 0, sum_plain = 0;
    for (int i = 0; i < 1000; ++i) {
        const Point2 j{u(rng), u(rng)};
        const TensorF t = render_targets(std::vector<Point2>{j}, {true}, 64, 1.0);
        const Point2 truth{j.x - 0.5, j.y - 0.5};
        const DecodedPeak a = decode(t.data(), 64, 64), b = decode(t.data(), 64, 64, false);
        const double ea = distance({a.x, a.y}, truth);
        worst = std::max(worst, ea);
        sum_offset += ea;
        sum_plain += distance({b.x, b.y}, truth);
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "worst %.3f px; mean %.4f px with quarter offset vs %.4f px argmax", worst,
                  sum_offset / 1000, sum_plain / 1000);
    return {worst < 0.5 && sum_offset < sum_plain, buf};
}

// ---- 7

// Trapezoidal PR area written as pairwise comparisons: every positive i adds
// a recall step of 1/P whose endpoints are the precision counted over items
// scoring >= s_i and over items scoring > s_i.
double pairwise_pr_auc(const std::vector<double>& s, const std::vector<bool>& y) {
    double pos = 0;
    for (bool b : y) pos += b;
    double area = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!y[i]) continue;
        double at = 0, at_pos = 0;
        for (std::size_t j = 0; j < s.size(); ++j)
            if (s[j] >= s[i]) {
                ++at;
                at_pos += y[j];
            }
        const double above = at - 1, above_pos = at_pos - 1;
        const double p_at = at_pos / at, p_before = above > 0 ? above_pos / above : 1.0;
        area += (p_at + p_before) / 2 / pos;
    }
    return area;
}

Outcome metric_oracles() {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0, 1);
    int pck_mismatch = 0;
    bool monotone = true;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + trial % 5, k = 1 + trial % 4;
        std::vector<Annotation> ann(n);
        std::vector<std::vector<Point2>> pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            ann[i].image = "x";
            ann[i].norm_length = 0.1 + u(rng);
            for (std::size_t j = 0; j < k; ++j) {
                ann[i].joints.push_back({u(rng), u(rng)});
                ann[i].present.push_back(u(rng) < 0.8);
                ann[i].visible.push_back(ann[i].present.back() && u(rng) < 0.7);
                pred[i].push_back({u(rng), u(rng)});
            }
        }
        const std::vector<double> th = default_thresholds();
        const PckCurve curve = pck_curve(pred, ann, th);
        for (std::size_t t = 0; t < th.size(); ++t) {
            std::size_t c = 0, m = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < k; ++j) {
                    if (!ann[i].present[j]) continue;
                    ++m;
                    const double dx = pred[i][j].x - ann[i].joints[j].x, dy = pred[i][j].y - ann[i].joints[j].y;
                    c += std::sqrt(dx * dx + dy * dy) / ann[i].norm_length <= th[t];
                }
            const auto& got = curve.points[t].total;
            if (m == 0 ? got.has_value() : (!got || *got != double(c) / double(m))) ++pck_mismatch;
            if (t > 0 && got && curve.points[t - 1].total && *got < *curve.points[t - 1].total) monotone = false;
        }
    }
    double worst_auc = 0;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s;
        std::vector<bool> y;
        for (int i = 0; i < 300; ++i) {
            const bool b = u(rng) < 0.35;
            y.push_back(b);
            s.push_back(u(rng) + (b ? 0.4 * u(rng) : 0.0));
        }
        y[0] = true;
        y[1] = false;
        std::unique_ptr<bool[]> flags(new bool[y.size()]);
        for (std::size_t i = 0; i < y.size(); ++i) flags[i] = y[i];
        const PresenceCurve c = presence_pr(s, std::span<const bool>(flags.get(), y.size()));
        worst_auc = std::max(worst_auc, std::abs(*c.auc - pairwise_pr_auc(s, y)));
    }
    char buf[160];
    std::snprintf(buf, sizeof buf, "pck mismatches %d/1100, curves %s, worst AUC difference %.1e", pck_mismatch,
                  monotone ? "monotone" : "NOT monotone", worst_auc);
    return {pck_mismatch == 0 && monotone && worst_auc <= 1e-9, buf};
}

// ---- 8

Outcome targets() {
    const TensorF t = render_targets(std::vector<Point2>{{20.5, 30.5}, {5.5, 5.5}}, {true, false}, 64, 1.0);
    const auto v = t.data();
    const float peak = v[30 * 64 + 20];
    const double one_px = v[30 * 64 + 21];
    float max_val = 0;
    for (std::size_t i = 0; i < 4096; ++i) max_val = std::max(max_val, v[i]);
    bool zero = true;
    for (std::size_t i = 4096; i < 8192; ++i) zero = zero && v[i] == 0.0f;
    char buf[128];
    std::snprintf(buf, sizeof buf, "peak %.9g, one pixel away %.9f (exp(-0.5) = %.9f), absent channel %s", peak,
                  one_px, std::exp(-0.5), zero ? "all zero" : "NOT zero");
    return {peak == 1.0f && max_val == 1.0f && std::abs(one_px - std::exp(-0.5)) <= 1e-6 && zero, buf};
}

// ---- 9

Outcome flip_symmetry() {
    const Dataset d = synth(4, 9);
    const auto perm = d.header.flip_permutation();
    auto model = init_params<float>(ModelConfig::desk_scale(), 9);
    // Record one batch of statistics so eval mode has something to use.
    {
        Graph<float> g(false);
        std::vector<float> px;
        for (const auto& s : d.samples) {
            const auto c = crop_and_resize(s.image, s.annotation.center, s.annotation.scale, 64).pixels;
            px.insert(px.end(), c.begin(), c.end());
        }
        stacked_forward(g, TensorF(Shape{4, 3, 64, 64}, px), model, Mode::train);
        const TensorF x(Shape{4, 3, 64, 64}, px);
        const TensorF xm(x.shape(), mirror_planar(x.data(), 12, 64, 64));
        const TensorF a = predict_with_flip(model, x, perm);
        const TensorF b = mirror_heatmaps(predict_with_flip(model, xm, perm), perm);
        const bool equal = values(a) == values(b);
        return {equal, equal ? "bit-identical over 4 x 14 x 16 x 16 heatmaps" : "heatmaps differ"};
    }
}

// ---- 10

Outcome persistence() {
    const Dataset d = synth(12, 10);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.max_iterations = 8;
    tc.eval_interval = 4;
    tc.workers = 1;
    tc.seed = 10;
    const fs::path dir = fs::temp_directory_path() / ("hg_acceptance_" + std::to_string(std::random_device{}()));
    fs::create_directories(dir);

    auto straight = init_params<float>(ModelConfig::desk_scale(), 10);
    Trainer ts(straight, d, d, tc);
    const TrainResult full = ts.run();
    save_checkpoint(dir / "straight.hgnet", straight, &ts.optimizer(), &ts.state(), &tc);

    Checkpoint reload = load_checkpoint(dir / "straight.hgnet");
    bool round_trip = true;
    std::vector<std::vector<float>> a, b;
    straight.for_each_tensor([&](const std::string&, TensorF& t, TensorRole) { a.push_back(values(t)); });
    reload.model.for_each_tensor([&](const std::string&, TensorF& t, TensorRole) { b.push_back(values(t)); });
    round_trip = a == b && reload.optimizer.square_avg.size() == ts.optimizer().square_avg.size();
    for (std::size_t i = 0; round_trip && i < reload.optimizer.square_avg.size(); ++i)
        round_trip = values(reload.optimizer.square_avg[i]) == values(ts.optimizer().square_avg[i]);
    round_trip = round_trip && reload.trainer && *reload.trainer == ts.state();

    auto first = init_params<float>(ModelConfig::desk_scale(), 10);
    TrainConfig half = tc;
    half.max_iterations = 5;
    Trainer t1(first, d, d, half);
    t1.run();
    save_checkpoint(dir / "half.hgnet", first, &t1.optimizer(), &t1.state(), &half);
    Checkpoint c = load_checkpoint(dir / "half.hgnet");
    Trainer t2(c.model, d, d, tc);
    t2.optimizer() = c.optimizer;
    t2.restore(*c.trainer);
    const TrainResult rest = t2.run();
    std::vector<std::vector<float>> resumed;
    c.model.for_each_tensor([&](const std::string&, TensorF& t, TensorRole) { resumed.push_back(values(t)); });
    save_checkpoint(dir / "resumed.hgnet", c.model, &t2.optimizer(), &t2.state(), &tc);
    const bool same_file = read_text(dir / "resumed.hgnet") == read_text(dir / "straight.hgnet");
    const bool resumed_ok = resumed == a && rest.log.back().train_loss == full.log.back().train_loss &&
                            rest.log.back().stack_accuracy == full.log.back().stack_accuracy && same_file;
    fs::remove_all(dir);
    return {round_trip && resumed_ok,
            std::string("checkpoint round trip ") + (round_trip ? "bit-exact" : "DIFFERS") +
                "; resumed at 5 of 8 iterations: " + (resumed_ok ? "identical checkpoint and log" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria = {
        {1, {"gradient suite", gradient_suite}},
        {2, {"shape and topology", shapes}},
        {3, {"equal-parameter variants", equal_parameters}},
        {4, {"overfit 16 samples", overfit}},
        {5, {"generalization 500/100", generalization}},
        {6, {"decoder oracle", decoder_oracle}},
        {7, {"metric oracles", metric_oracles}},
        {8, {"target correctness", targets}},
        {9, {"flip symmetry", flip_symmetry}},
        {10, {"persistence and determinism", persistence}},
    };
    std::vector<int> selected;
    for (int i = 1; i < argc; ++i) {
        const int n = std::atoi(argv[i]);
        if (!criteria.count(n)) {
            std::cerr << "unknown criterion " << argv[i] << "\n";
            return 2;
        }
        selected.push_back(n);
    }
    if (selected.empty())
        for (const auto& [n, _] : criteria) selected.push_back(n);

    bool all = true;
    for (int n : selected) {
        const auto& [name, fn] = criteria.at(n);
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        all = all && o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << n << " " << name << ": " << o.detail << std::endl;
    }
    return all ? 0 : 1;
}
