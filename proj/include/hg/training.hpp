#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hg/annotation.hpp"
#include "hg/eval.hpp"
#include "hg/graph.hpp"
#include "hg/model.hpp"
#include "hg/rmsprop.hpp"

namespace hg {

struct TrainConfig {
    double learning_rate = 2.5e-4;
    double lr_drop_factor = 5;
    int plateau_patience = 5;  // evaluations without a new best before the drop
    double rotation_max_deg = 30;
    double scale_min = 0.75;
    double scale_max = 1.25;
    double sigma_px = 1.0;  // at output resolution
    bool augment = true;
    bool flip_augment = true;
    int batch_size = 8;
    long max_iterations = 2000;
    long eval_interval = 100;
    long checkpoint_interval = 0;  // 0: only at the end
    bool intermediate_supervision = true;
    std::optional<double> stop_at_accuracy;  // final-stack validation PCK that ends training early
    double pck_threshold = 0.5;
    int workers = 1;
    std::uint64_t seed = 1;
    double rmsprop_alpha = 0.99;
    double rmsprop_epsilon = 1e-8;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

struct AugmentParams {
    double rotation_deg = 0;
    double scale_multiplier = 1;
    bool mirror = false;
};

/// Rotation uniform in [-max, max], scale uniform in [scale_min, scale_max],
/// mirror with probability 1/2 when flip augmentation is on. Identity when
/// augmentation is off.
AugmentParams draw_augmentation(std::mt19937_64& rng, const TrainConfig& config);

/// Network input and supervision for one sample.
struct PreparedSample {
    std::vector<float> image;           // [3][in_res][in_res]
    std::vector<Point2> joints;         // output-resolution continuous coordinates, in model joint order
    std::vector<bool> present;          // false when absent or outside the output window
    Affine2 original_to_input;
};

/// Crops with the augmentation applied about the annotation center. Mirroring
/// relabels joints with `flip_perm` so channel k still means joint k.
PreparedSample prepare_sample(const Sample& sample, const std::vector<int>& flip_perm, const ModelConfig& model,
                              const AugmentParams& aug);

/// Joint coordinates after the crop map, in output-resolution units.
std::vector<Point2> transform_joints(std::span<const Point2> joints, const Affine2& original_to_input,
                                     int input_resolution, int output_resolution);

/// [K, R, R] Gaussian targets. Channel k is
/// exp(-((x - xk)^2 + (y - yk)^2) / (2 sigma^2)) sampled at pixel centers and
/// divided by its largest sample, so the pixel nearest the joint holds exactly 1.
/// Absent joints give all-zero channels.
TensorF render_targets(std::span<const Point2> joints, const std::vector<bool>& present, int resolution,
                       double sigma_px);

/// Sum over stacks of mse_loss(prediction, target).
TensorF multi_stack_loss(Graph<float>& g, std::span<const TensorF> predictions, const TensorF& target);

/// Renders each annotation's targets in its center crop and decodes them back
/// through the evaluation path, as if a perfect network had produced them.
std::vector<PosePrediction> predict_from_targets(const Dataset& data, const ModelConfig& model, double sigma_px = 1.0);

struct LogRow {
    long iteration = 0;
    double lr = 0;
    double train_loss = 0;  // mean over iterations since the previous row
    std::vector<std::optional<double>> stack_accuracy;
};

/// Everything besides parameters and optimizer buffers needed to continue a run.
struct TrainerState {
    long iteration = 0;
    double lr = 0;
    double best_accuracy = -1;
    int evals_since_best = 0;
    bool lr_dropped = false;
    double loss_sum = 0;
    long loss_count = 0;
    std::string rng_state;
    bool operator==(const TrainerState&) const = default;
};

struct TrainCallbacks {
    std::function<void(const LogRow&)> on_log;
    std::function<void(long iteration)> on_checkpoint;
};

struct TrainResult {
    std::vector<LogRow> log;
    bool reached_target = false;
};

class Trainer {
public:
    /// `validation` may alias `train`; evaluation always uses unaugmented center crops.
    Trainer(StackedModelParams<float>& model, const Dataset& train, const Dataset& validation, TrainConfig config);

    /// One minibatch update; returns the loss. Throws std::runtime_error naming
    /// the batch when the loss is not finite.
    double step();
    /// Validation row at the current iteration. A scheduled evaluation applies
    /// the plateau rule and restarts the loss average; an unscheduled one (the
    /// closing row of a run that stops between intervals) only reports, so a
    /// checkpoint taken afterwards resumes exactly like an uninterrupted run.
    LogRow evaluate(bool scheduled = true);
    /// Steps until max_iterations or the accuracy target, evaluating every
    /// eval_interval iterations and once at the end.
    TrainResult run(const TrainCallbacks& callbacks = {});

    const TrainConfig& config() const { return config_; }
    const TrainerState& state() const;
    RmsPropState<float>& optimizer() { return optimizer_; }
    /// Restores iteration counters, learning-rate schedule and rng state.
    void restore(const TrainerState& state);

private:
    std::vector<std::size_t> draw_batch();

    StackedModelParams<float>& model_;
    const Dataset& train_;
    const Dataset& validation_;
    TrainConfig config_;
    std::vector<int> flip_perm_;
    std::vector<TensorF> params_;
    RmsPropState<float> optimizer_;
    std::mt19937_64 rng_;
    mutable TrainerState state_;
};

}  // namespace hg
