#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hg/geometry.hpp"

namespace hg {

/// 8-bit interleaved RGB image.
struct ImageU8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;  // width * height * 3

    ImageU8() = default;
    ImageU8(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

    bool empty() const { return width <= 0 || height <= 0; }
    std::uint8_t* at(int x, int y) { return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* at(int x, int y) const {
        return pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    bool operator==(const ImageU8&) const = default;
};

/// Side of the square crop window in original pixels per unit of annotation scale.
inline constexpr double kScaleToPixels = 200.0;

/// Placement of a square crop in the original image.
struct CropSpec {
    Point2 center;
    double scale = 1;             // window side = scale * kScaleToPixels
    double rotation_deg = 0;      // about the window center
    double scale_multiplier = 1;  // > 1 widens the window
    bool mirror = false;          // horizontal flip of the crop
};

/// Maps original-image coordinates to crop coordinates of a `resolution`-sized
/// square. Throws std::invalid_argument for a non-positive scale.
Affine2 crop_transform(const CropSpec& spec, int resolution);

/// Planar float crop [3][resolution][resolution], values in [0, 1].
struct CropResult {
    std::vector<float> pixels;
    Affine2 original_to_crop;
    int resolution = 0;
};

/// Resamples the image through the inverse of `original_to_crop` with bilinear
/// interpolation at pixel centers; samples outside the image read as zero.
CropResult warp_image(const ImageU8& image, const Affine2& original_to_crop, int resolution);

/// Axis-aligned crop of side scale * 200 around center, resized to out_res.
CropResult crop_and_resize(const ImageU8& image, Point2 center, double scale, int out_res);

/// Horizontal mirror of planar channel-major data (`channels` planes of width x height).
std::vector<float> mirror_planar(std::span<const float> data, int channels, int height, int width);

}  // namespace hg
