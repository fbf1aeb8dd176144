#include "hg/image.hpp"

#include <cmath>
#include <stdexcept>

namespace hg {

Affine2 crop_transform(const CropSpec& spec, int resolution) {
    if (!(spec.scale > 0)) throw std::invalid_argument("crop: scale must be positive");
    if (!(spec.scale_multiplier > 0)) throw std::invalid_argument("crop: scale multiplier must be positive");
    if (resolution <= 0) throw std::invalid_argument("crop: output resolution must be positive");
    const double side = spec.scale * kScaleToPixels * spec.scale_multiplier;
    const double half = resolution / 2.0;
    Affine2 m = Affine2::translation(-spec.center.x, -spec.center.y)
                    .then(Affine2::rotation_degrees(spec.rotation_deg))
                    .then(Affine2::scaling(resolution / side))
                    .then(Affine2::translation(half, half));
    if (spec.mirror) m = m.then(Affine2::mirror_x(resolution));
    return m;
}

CropResult warp_image(const ImageU8& image, const Affine2& original_to_crop, int resolution) {
    if (image.empty()) throw std::invalid_argument("crop: empty image");
    if (resolution <= 0) throw std::invalid_argument("crop: output resolution must be positive");
    CropResult out;
    out.resolution = resolution;
    out.original_to_crop = original_to_crop;
    const std::size_t plane = static_cast<std::size_t>(resolution) * resolution;
    out.pixels.assign(plane * 3, 0.0f);
    const Affine2 inv = original_to_crop.inverse();
    const int w = image.width, h = image.height;
    for (int v = 0; v < resolution; ++v) {
        for (int u = 0; u < resolution; ++u) {
            const Point2 src = inv.apply({u + 0.5, v + 0.5});
            // Index space of the source: pixel centers sit at integers.
            const double fx = src.x - 0.5, fy = src.y - 0.5;
            const int x0 = static_cast<int>(std::floor(fx)), y0 = static_cast<int>(std::floor(fy));
            const double ax = fx - x0, ay = fy - y0;
            double acc[3] = {0, 0, 0};
            for (int dy = 0; dy < 2; ++dy) {
                const int y = y0 + dy;
                if (y < 0 || y >= h) continue;
                const double wy = dy ? ay : 1 - ay;
                for (int dx = 0; dx < 2; ++dx) {
                    const int x = x0 + dx;
                    if (x < 0 || x >= w) continue;
                    const double wgt = wy * (dx ? ax : 1 - ax);
                    const std::uint8_t* px = image.at(x, y);
                    for (int c = 0; c < 3; ++c) acc[c] += wgt * px[c];
                }
            }
            const std::size_t idx = static_cast<std::size_t>(v) * resolution + u;
            for (int c = 0; c < 3; ++c) out.pixels[c * plane + idx] = static_cast<float>(acc[c] / 255.0);
        }
    }
    return out;
}

CropResult crop_and_resize(const ImageU8& image, Point2 center, double scale, int out_res) {
    CropSpec spec;
    spec.center = center;
    spec.scale = scale;
    return warp_image(image, crop_transform(spec, out_res), out_res);
}

std::vector<float> mirror_planar(std::span<const float> data, int channels, int height, int width) {
    std::vector<float> out(data.size());
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < height; ++y) {
            const std::size_t row = (static_cast<std::size_t>(c) * height + y) * width;
            for (int x = 0; x < width; ++x) out[row + x] = data[row + (width - 1 - x)];
        }
    return out;
}

}  // namespace hg
