#include "hg/training.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "hg/eval.hpp"
#include "hg/image.hpp"

namespace hg {

void TrainConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
    };
    require(learning_rate > 0, "learning_rate must be positive");
    require(lr_drop_factor > 0, "lr_drop_factor must be positive");
    require(plateau_patience > 0, "plateau_patience must be positive");
    require(rotation_max_deg >= 0, "rotation_max_deg must be non-negative");
    require(scale_min > 0 && scale_min <= 1 && scale_max >= 1, "scale jitter must be positive and contain 1");
    require(sigma_px > 0, "sigma_px must be positive");
    require(batch_size > 0, "batch_size must be positive");
    require(max_iterations > 0, "max_iterations must be positive");
    require(eval_interval > 0, "eval_interval must be positive");
    require(checkpoint_interval >= 0, "checkpoint_interval must be non-negative");
    require(pck_threshold > 0, "pck_threshold must be positive");
    require(workers > 0, "workers must be positive");
    require(rmsprop_alpha > 0 && rmsprop_alpha < 1, "rmsprop_alpha must lie in (0, 1)");
    require(rmsprop_epsilon >= 0, "rmsprop_epsilon must be non-negative");
}

AugmentParams draw_augmentation(std::mt19937_64& rng, const TrainConfig& config) {
    AugmentParams p;
    if (!config.augment) return p;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    p.rotation_deg = (2 * unit(rng) - 1) * config.rotation_max_deg;
    p.scale_multiplier = config.scale_min + unit(rng) * (config.scale_max - config.scale_min);
    if (config.flip_augment) p.mirror = unit(rng) < 0.5;
    return p;
}

std::vector<Point2> transform_joints(std::span<const Point2> joints, const Affine2& original_to_input,
                                     int input_resolution, int output_resolution) {
    const double f = static_cast<double>(output_resolution) / input_resolution;
    std::vector<Point2> out;
    out.reserve(joints.size());
    for (const auto& j : joints) out.push_back(f * original_to_input.apply(j));
    return out;
}

PreparedSample prepare_sample(const Sample& sample, const std::vector<int>& flip_perm, const ModelConfig& model,
                              const AugmentParams& aug) {
    const Annotation& a = sample.annotation;
    const std::size_t k = a.num_joints();
    if (static_cast<int>(k) != model.num_joints)
        throw std::invalid_argument("sample " + a.image + " has " + std::to_string(k) + " joints, model expects " +
                                    std::to_string(model.num_joints));
    CropSpec spec;
    spec.center = a.center;
    spec.scale = a.scale;
    spec.rotation_deg = aug.rotation_deg;
    spec.scale_multiplier = aug.scale_multiplier;
    spec.mirror = aug.mirror;
    const Affine2 t = crop_transform(spec, model.input_resolution);

    PreparedSample out;
    out.original_to_input = t;
    out.image = warp_image(sample.image, t, model.input_resolution).pixels;
    const std::vector<Point2> moved = transform_joints(a.joints, t, model.input_resolution, model.output_resolution);
    out.joints.resize(k);
    out.present.assign(k, false);
    const double r = model.output_resolution;
    for (std::size_t j = 0; j < k; ++j) {
        // After mirroring, the figure's left joint is drawn where its right one was.
        const std::size_t src = aug.mirror ? static_cast<std::size_t>(flip_perm.at(j)) : j;
        out.joints[j] = moved[src];
        const Point2 p = moved[src];
        out.present[j] = a.present[src] && p.x >= 0 && p.x < r && p.y >= 0 && p.y < r;
    }
    return out;
}

TensorF render_targets(std::span<const Point2> joints, const std::vector<bool>& present, int resolution,
                       double sigma_px) {
    if (joints.size() != present.size()) throw std::invalid_argument("render_targets: joints/present size mismatch");
    if (resolution <= 0 || !(sigma_px > 0)) throw std::invalid_argument("render_targets: bad resolution or sigma");
    const std::size_t k = joints.size(), r = static_cast<std::size_t>(resolution);
    TensorF out(Shape{k, r, r});
    auto v = out.data();
    std::vector<double> gx(r), gy(r);
    const double denom = 2 * sigma_px * sigma_px;
    for (std::size_t j = 0; j < k; ++j) {
        if (!present[j]) continue;
        double mx = 0, my = 0;
        for (std::size_t i = 0; i < r; ++i) {
            const double dx = i + 0.5 - joints[j].x, dy = i + 0.5 - joints[j].y;
            gx[i] = std::exp(-dx * dx / denom);
            gy[i] = std::exp(-dy * dy / denom);
            mx = std::max(mx, gx[i]);
            my = std::max(my, gy[i]);
        }
        // The Gaussian is separable, so the largest sample is mx * my.
        if (!(mx > 0 && my > 0)) continue;
        for (std::size_t i = 0; i < r; ++i) {
            gx[i] /= mx;
            gy[i] /= my;
        }
        float* c = v.data() + j * r * r;
        for (std::size_t y = 0; y < r; ++y)
            for (std::size_t x = 0; x < r; ++x) c[y * r + x] = static_cast<float>(gy[y] * gx[x]);
    }
    return out;
}

TensorF multi_stack_loss(Graph<float>& g, std::span<const TensorF> predictions, const TensorF& target) {
    if (predictions.empty()) throw std::invalid_argument("multi_stack_loss: no stacks");
    TensorF total = g.mse_loss(predictions[0], target);
    for (std::size_t s = 1; s < predictions.size(); ++s) total = g.add(total, g.mse_loss(predictions[s], target));
    return total;
}

std::vector<PosePrediction> predict_from_targets(const Dataset& data, const ModelConfig& model, double sigma_px) {
    std::vector<PosePrediction> out;
    out.reserve(data.size());
    for (const auto& s : data.samples) {
        const Annotation& a = s.annotation;
        CropSpec spec;
        spec.center = a.center;
        spec.scale = a.scale;
        const Affine2 t = crop_transform(spec, model.input_resolution);
        const std::vector<Point2> joints = transform_joints(a.joints, t, model.input_resolution, model.output_resolution);
        const TensorF hm = render_targets(joints, a.present, model.output_resolution, sigma_px);
        out.push_back(decode_pose(hm.data(), static_cast<int>(a.num_joints()), model.output_resolution,
                                  model.input_resolution, t));
    }
    return out;
}

Trainer::Trainer(StackedModelParams<float>& model, const Dataset& train, const Dataset& validation, TrainConfig config)
    : model_(model), train_(train), validation_(validation), config_(config), rng_(config.seed) {
    config_.validate();
    if (train_.empty()) throw std::invalid_argument("train: empty training set");
    if (train_.header.num_joints() != model_.config.num_joints)
        throw std::invalid_argument("train: dataset has " + std::to_string(train_.header.num_joints()) +
                                    " joints, model predicts " + std::to_string(model_.config.num_joints));
    flip_perm_ = train_.header.flip_permutation();
    model_.set_requires_grad(true);
    params_ = model_.parameters();
    state_.lr = config_.learning_rate;
}

const TrainerState& Trainer::state() const {
    std::ostringstream os;
    os << rng_;
    state_.rng_state = os.str();
    return state_;
}

void Trainer::restore(const TrainerState& state) {
    std::istringstream is(state.rng_state);
    std::mt19937_64 rng;
    is >> rng;
    if (!is) throw std::invalid_argument("trainer: unreadable rng state");
    rng_ = rng;
    state_ = state;
}

std::vector<std::size_t> Trainer::draw_batch() {
    std::vector<std::size_t> idx(static_cast<std::size_t>(config_.batch_size));
    for (auto& i : idx) i = static_cast<std::size_t>(rng_() % train_.size());
    return idx;
}

double Trainer::step() {
    const ModelConfig& mc = model_.config;
    const std::vector<std::size_t> batch = draw_batch();
    std::vector<std::uint64_t> seeds(batch.size());
    for (auto& s : seeds) s = rng_();

    const std::size_t n = batch.size();
    const std::size_t in_plane = 3 * static_cast<std::size_t>(mc.input_resolution) * mc.input_resolution;
    const std::size_t hm_size = static_cast<std::size_t>(mc.num_joints) * mc.output_resolution * mc.output_resolution;
    std::vector<float> images(n * in_plane), targets(n * hm_size);

    // Each slot depends only on its own seed, so the worker count cannot change the result.
    auto fill = [&](std::size_t i) {
        std::mt19937_64 local(seeds[i]);
        const AugmentParams aug = draw_augmentation(local, config_);
        const PreparedSample p = prepare_sample(train_.samples[batch[i]], flip_perm_, mc, aug);
        std::copy(p.image.begin(), p.image.end(), images.begin() + i * in_plane);
        const TensorF t = render_targets(p.joints, p.present, mc.output_resolution, config_.sigma_px);
        auto tv = t.data();
        std::copy(tv.begin(), tv.end(), targets.begin() + i * hm_size);
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.workers), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fill(i);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                for (std::size_t i = w; i < n; i += workers) fill(i);
            });
        for (auto& t : pool) t.join();
    }

    const std::size_t in_res = static_cast<std::size_t>(mc.input_resolution);
    const std::size_t out_res = static_cast<std::size_t>(mc.output_resolution);
    TensorF x(Shape{n, 3, in_res, in_res}, std::move(images));
    TensorF target(Shape{n, static_cast<std::size_t>(mc.num_joints), out_res, out_res}, std::move(targets));

    Graph<float> g;
    std::vector<TensorF> preds = stacked_forward(g, x, model_, Mode::train);
    std::span<const TensorF> supervised(preds);
    if (!config_.intermediate_supervision) supervised = supervised.last(1);
    TensorF loss = multi_stack_loss(g, supervised, target);
    const double value = loss.item();
    if (!std::isfinite(value)) {
        std::string names;
        for (std::size_t i : batch) names += (names.empty() ? "" : ", ") + train_.samples[i].annotation.image;
        throw std::runtime_error("non-finite loss at iteration " + std::to_string(state_.iteration + 1) +
                                 " (batch: " + names + ")");
    }
    model_.zero_grad();
    g.backward(loss);
    RmsPropOptions opt;
    opt.learning_rate = state_.lr;
    opt.alpha = config_.rmsprop_alpha;
    opt.epsilon = config_.rmsprop_epsilon;
    rmsprop_step(params_, optimizer_, opt);
    model_.zero_grad();

    ++state_.iteration;
    state_.loss_sum += value;
    ++state_.loss_count;
    return value;
}

LogRow Trainer::evaluate(bool scheduled) {
    LogRow row;
    row.iteration = state_.iteration;
    row.train_loss = state_.loss_count ? state_.loss_sum / static_cast<double>(state_.loss_count) : 0.0;
    row.stack_accuracy = stack_accuracies(model_, validation_, config_.pck_threshold);
    row.lr = state_.lr;
    if (!scheduled) return row;
    state_.loss_sum = 0;
    state_.loss_count = 0;
    const double acc = row.stack_accuracy.back().value_or(0.0);
    if (acc > state_.best_accuracy) {
        state_.best_accuracy = acc;
        state_.evals_since_best = 0;
    } else if (++state_.evals_since_best >= config_.plateau_patience && !state_.lr_dropped) {
        state_.lr /= config_.lr_drop_factor;
        state_.lr_dropped = true;
    }
    row.lr = state_.lr;
    return row;
}

TrainResult Trainer::run(const TrainCallbacks& callbacks) {
    TrainResult result;
    auto emit = [&](const LogRow& row) {
        result.log.push_back(row);
        if (callbacks.on_log) callbacks.on_log(row);
        if (config_.stop_at_accuracy && row.stack_accuracy.back().value_or(0.0) >= *config_.stop_at_accuracy)
            result.reached_target = true;
    };
    while (state_.iteration < config_.max_iterations && !result.reached_target) {
        step();
        if (state_.iteration % config_.eval_interval == 0)
            emit(evaluate());
        else if (state_.iteration == config_.max_iterations)
            emit(evaluate(false));
        if (callbacks.on_checkpoint && config_.checkpoint_interval > 0 &&
            state_.iteration % config_.checkpoint_interval == 0)
            callbacks.on_checkpoint(state_.iteration);
    }
    if (callbacks.on_checkpoint) callbacks.on_checkpoint(state_.iteration);
    return result;
}

}  // namespace hg
