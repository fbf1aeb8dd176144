#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hg/annotation.hpp"

namespace hg {

/// One bone of the stick figure. The child joint sits at
/// parent + length * figure_height * dir(angle), where dir(0) points down the
/// body axis and dir(90) points to image right. Angles are measured in the body
/// frame, or relative to the parent bone's direction when `relative` is set.
struct BoneSpec {
    int joint = 0;
    int parent = -1;
    double length = 0;
    double min_angle_deg = 0;
    double max_angle_deg = 0;
    bool relative = false;
};

struct SkeletonSpec {
    std::vector<std::string> joint_names;
    int root = 0;
    std::vector<BoneSpec> bones;  // parents listed before children
    std::vector<std::pair<int, int>> flip_pairs;
    int head_top = 0;  // head segment = head_top..root, the PCK normalizer
    double max_body_tilt_deg = 20;

    /// 14-joint frontal figure: head top, neck, shoulders, elbows, wrists, hips, knees, ankles.
    static SkeletonSpec standard();
    /// Throws std::invalid_argument for cycles, bad flip pairs or non-positive bones.
    void validate() const;
    DatasetHeader header() const;
};

struct SynthOptions {
    int image_size = 64;
    double occlusion_probability = 0.0;
    double truncation_probability = 0.0;
    int max_distractors = 3;
    /// Figure height as a fraction of the image side.
    double min_height_fraction = 0.55;
    double max_height_fraction = 0.85;
    /// Crop window side relative to the figure height.
    double window_margin = 1.25;
    std::uint64_t seed = 1;
};

/// Deterministic in (options.seed, index).
Sample generate_sample(const SkeletonSpec& spec, const SynthOptions& options, std::size_t index);

/// Samples 0..count-1; throws std::invalid_argument for count < 1 or an image too small to draw on.
Dataset generate(const SkeletonSpec& spec, std::size_t count, const SynthOptions& options);

inline constexpr int kMinSynthImageSize = 32;

}  // namespace hg
