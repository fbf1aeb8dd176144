#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hg/annotation.hpp"
#include "hg/model.hpp"

namespace hg {

/// Peak location in heatmap index space (pixel i has its center at i).
struct DecodedPeak {
    double x = 0;
    double y = 0;
    bool degenerate = false;  // every value equal: no peak
};

/// Argmax (first in row-major order on ties), then, per axis, a 0.25 px shift
/// toward the larger of the two neighbours. No shift on equal neighbours or
/// when the peak touches the border along that axis.
DecodedPeak decode(std::span<const float> heatmap, int width, int height, bool quarter_offset = true);

/// Heatmap index coordinates -> original-image coordinates.
Point2 heatmap_to_original(double hx, double hy, int input_resolution, int output_resolution,
                           const Affine2& original_to_crop);

struct JointPrediction {
    Point2 position;  // original-image pixels
    double max_activation = 0;
    double mean_activation = 0;
};
using PosePrediction = std::vector<JointPrediction>;

/// Mirrors [N, K, R, R] heatmaps horizontally and permutes channels with `perm`.
TensorF mirror_heatmaps(const TensorF& heatmaps, const std::vector<int>& perm);

/// Final-stack heatmaps averaged with those of the mirrored input:
/// 0.5 * (hm(x) + mirror(permute(hm(mirror(x))))). Runs in eval mode.
TensorF predict_with_flip(StackedModelParams<float>& model, const TensorF& images, const std::vector<int>& flip_perm);

struct PredictOptions {
    bool flip = false;
    int batch_size = 16;
};

/// Predictions for every stack ([stack][sample]); with `flip` the final stack
/// is flip-averaged. Crops are centered on each annotation's center/scale.
std::vector<std::vector<PosePrediction>> predict_dataset(StackedModelParams<float>& model, const Dataset& data,
                                                         const PredictOptions& options = {});

/// Decodes [K, R, R] heatmaps of one sample into original-image joint predictions.
PosePrediction decode_pose(std::span<const float> heatmaps, int joints, int resolution, int input_resolution,
                           const Affine2& original_to_crop);

enum class JointFilter { all, visible, occluded };

struct PckResult {
    std::vector<std::optional<double>> per_joint;  // undefined when a joint has no countable instance
    std::optional<double> total;                   // pooled over all countable joints
    std::vector<std::size_t> correct;
    std::vector<std::size_t> counted;
};

/// Joint k of sample i is correct iff |pred - gt| / norm_length <= threshold.
/// Joints without ground truth are excluded from numerator and denominator.
PckResult pck(std::span<const std::vector<Point2>> predictions, std::span<const Annotation> annotations,
              double threshold, JointFilter filter = JointFilter::all);

struct PckCurve {
    std::vector<double> thresholds;
    std::vector<PckResult> points;
};

/// Thresholds must be non-empty and sorted ascending.
PckCurve pck_curve(std::span<const std::vector<Point2>> predictions, std::span<const Annotation> annotations,
                   std::span<const double> thresholds, JointFilter filter = JointFilter::all);

struct VisibilitySplit {
    PckResult all, visible, occluded;
};

VisibilitySplit visibility_split_eval(std::span<const std::vector<Point2>> predictions,
                                      std::span<const Annotation> annotations, double threshold);

struct PrPoint {
    double precision = 0;
    double recall = 0;
    double threshold = 0;
};

struct PresenceCurve {
    std::vector<PrPoint> points;  // one per distinct statistic value, descending threshold
    std::optional<double> auc;    // undefined for single-class input
};

/// Precision/recall of "statistic >= t" as a presence detector, swept over every
/// distinct statistic value. AUC integrates precision over recall with the
/// trapezoidal rule, anchored at recall 0 with the first point's precision.
PresenceCurve presence_pr(std::span<const double> statistic, std::span<const bool> present);

/// Column groups of the summary table: Head, Shoulder, Elbow, Wrist, Hip, Knee,
/// Ankle (those that occur), any other joint names, then Total.
std::vector<std::pair<std::string, std::vector<int>>> summary_groups(const std::vector<std::string>& joint_names);

/// Pooled accuracy of the joints in `group`.
std::optional<double> group_accuracy(const PckResult& result, const std::vector<int>& group);

struct EvalReport {
    std::vector<std::string> joint_names;
    double reference_threshold = 0.5;
    PckCurve curve, curve_visible, curve_occluded;
    VisibilitySplit at_reference;
    std::vector<PresenceCurve> presence_mean, presence_max;  // per joint
};

/// Default curve thresholds: 0, 0.05, ..., 0.5.
std::vector<double> default_thresholds();

EvalReport build_report(const DatasetHeader& header, std::span<const Annotation> annotations,
                        std::span<const PosePrediction> predictions, double reference_threshold,
                        std::span<const double> thresholds);

/// Per-stack PCK totals on `data` (no flip), as used for validation during training.
std::vector<std::optional<double>> stack_accuracies(StackedModelParams<float>& model, const Dataset& data,
                                                    double threshold, int batch_size = 16);

std::vector<std::vector<Point2>> positions(std::span<const PosePrediction> predictions);

}  // namespace hg
