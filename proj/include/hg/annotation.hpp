#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hg/geometry.hpp"
#include "hg/image.hpp"

namespace hg {

/// One annotated person instance.
struct Annotation {
    std::string image;          // path relative to the annotation file; doubles as the image id
    std::vector<Point2> joints;  // original image pixels
    std::vector<bool> present;   // a ground-truth location exists
    std::vector<bool> visible;   // not occluded; implies present
    Point2 center;
    double scale = 1;        // crop window side / 200 px
    double norm_length = 1;  // PCK normalizer (head-segment length)

    std::size_t num_joints() const { return joints.size(); }
    /// Throws std::invalid_argument if the invariants do not hold for `k` joints.
    void validate(std::size_t k) const;
    bool operator==(const Annotation&) const = default;
};

/// Dataset-level metadata: joint vocabulary and left/right pairing.
struct DatasetHeader {
    int version = 1;
    std::vector<std::string> joint_names;
    std::vector<std::pair<int, int>> flip_pairs;

    int num_joints() const { return static_cast<int>(joint_names.size()); }
    /// Channel permutation swapping every pair; throws if pairs overlap or are out of range.
    std::vector<int> flip_permutation() const;
    bool operator==(const DatasetHeader&) const = default;
};

struct Sample {
    ImageU8 image;
    Annotation annotation;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Sample> samples;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

/// Validates that `perm` is an involution over [0, perm.size()).
void check_involution(const std::vector<int>& perm);

}  // namespace hg
