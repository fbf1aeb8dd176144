#include "hg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace hg {

namespace {

constexpr double kPi = 3.14159265358979323846;

enum Joint { kHeadTop, kNeck, kRShoulder, kRElbow, kRWrist, kLShoulder, kLElbow, kLWrist,
             kRHip, kRKnee, kRAnkle, kLHip, kLKnee, kLAnkle, kNumJoints };

using Color = std::array<double, 3>;

double quantize(double v) { return std::round(v * 1e6) / 1e6; }

Point2 direction(double deg) {
    const double r = deg * kPi / 180.0;
    return {std::sin(r), std::cos(r)};
}

class Canvas {
public:
    explicit Canvas(int size) : size_(size), rgb_(static_cast<std::size_t>(size) * size * 3, 0.0) {}

    void blend(int x, int y, const Color& c, double alpha) {
        if (alpha <= 0 || x < 0 || y < 0 || x >= size_ || y >= size_) return;
        alpha = std::min(alpha, 1.0);
        double* px = &rgb_[(static_cast<std::size_t>(y) * size_ + x) * 3];
        for (int k = 0; k < 3; ++k) px[k] = (1 - alpha) * px[k] + alpha * c[k];
    }

    void set(int x, int y, const Color& c) { blend(x, y, c, 1.0); }

    /// Anti-aliased capsule: coverage falls off linearly over one pixel at the rim.
    void capsule(Point2 a, Point2 b, double radius, const Color& c) {
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius - 1)));
        const int x1 = std::min(size_ - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius - 1)));
        const int y1 = std::min(size_ - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius + 1)));
        const Point2 ab = b - a;
        const double len2 = ab.x * ab.x + ab.y * ab.y;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const Point2 p{x + 0.5, y + 0.5};
                double t = len2 > 0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double d = distance(p, a + t * ab);
                blend(x, y, c, radius + 0.5 - d);
            }
    }

    void rect(double cx, double cy, double w, double h, const Color& c) {
        const int x0 = std::max(0, static_cast<int>(std::floor(cx - w / 2)));
        const int x1 = std::min(size_ - 1, static_cast<int>(std::ceil(cx + w / 2)));
        const int y0 = std::max(0, static_cast<int>(std::floor(cy - h / 2)));
        const int y1 = std::min(size_ - 1, static_cast<int>(std::ceil(cy + h / 2)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const double ox = std::min(x + 1.0, cx + w / 2) - std::max(double(x), cx - w / 2);
                const double oy = std::min(y + 1.0, cy + h / 2) - std::max(double(y), cy - h / 2);
                blend(x, y, c, std::clamp(ox, 0.0, 1.0) * std::clamp(oy, 0.0, 1.0));
            }
    }

    ImageU8 to_image() const {
        ImageU8 img(size_, size_);
        for (std::size_t i = 0; i < rgb_.size(); ++i)
            img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(rgb_[i]), 0L, 255L));
        return img;
    }

    int size() const { return size_; }

private:
    int size_;
    std::vector<double> rgb_;
};

void paint_background(Canvas& canvas, std::mt19937_64& rng, int max_distractors) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int grid = 5;
    const double base = 60 + 130 * u(rng);
    std::vector<Color> nodes((grid + 1) * (grid + 1));
    for (auto& n : nodes)
        for (auto& ch : n) ch = std::clamp(base + (u(rng) - 0.5) * 90, 0.0, 255.0);
    const int s = canvas.size();
    for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
            const double gx = (x + 0.5) / s * grid, gy = (y + 0.5) / s * grid;
            const int ix = std::min(static_cast<int>(gx), grid - 1), iy = std::min(static_cast<int>(gy), grid - 1);
            const double fx = gx - ix, fy = gy - iy;
            Color c;
            for (int k = 0; k < 3; ++k) {
                const double top = (1 - fx) * nodes[iy * (grid + 1) + ix][k] + fx * nodes[iy * (grid + 1) + ix + 1][k];
                const double bot =
                    (1 - fx) * nodes[(iy + 1) * (grid + 1) + ix][k] + fx * nodes[(iy + 1) * (grid + 1) + ix + 1][k];
                c[k] = (1 - fy) * top + fy * bot;
            }
            canvas.set(x, y, c);
        }
    std::uniform_int_distribution<int> count(0, std::max(0, max_distractors));
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
        const Color c{255 * u(rng), 255 * u(rng), 255 * u(rng)};
        const double cx = s * u(rng), cy = s * u(rng);
        const double size = s * (0.05 + 0.15 * u(rng));
        if (u(rng) < 0.5)
            canvas.rect(cx, cy, size, size * (0.5 + u(rng)), c);
        else
            canvas.capsule({cx, cy}, {cx, cy}, size / 2, c);
    }
}

}  // namespace

SkeletonSpec SkeletonSpec::standard() {
    SkeletonSpec s;
    s.joint_names = {"head_top", "neck",  "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow",
                     "l_wrist",  "r_hip", "r_knee",     "r_ankle", "l_hip",   "l_knee",     "l_ankle"};
    s.root = kNeck;
    s.head_top = kHeadTop;
    s.bones = {
        {kHeadTop, kNeck, 0.18, 168, 192, false},
        {kRShoulder, kNeck, 0.12, -95, -85, false},
        {kRElbow, kRShoulder, 0.17, -160, 10, false},
        {kRWrist, kRElbow, 0.15, -130, 30, true},
        {kLShoulder, kNeck, 0.12, 85, 95, false},
        {kLElbow, kLShoulder, 0.17, -10, 160, false},
        {kLWrist, kLElbow, 0.15, -30, 130, true},
        {kRHip, kNeck, 0.33, -16, -12, false},
        {kRKnee, kRHip, 0.24, -35, 15, false},
        {kRAnkle, kRKnee, 0.23, -30, 30, true},
        {kLHip, kNeck, 0.33, 12, 16, false},
        {kLKnee, kLHip, 0.24, -15, 35, false},
        {kLAnkle, kLKnee, 0.23, -30, 30, true},
    };
    s.flip_pairs = {{kRShoulder, kLShoulder}, {kRElbow, kLElbow}, {kRWrist, kLWrist},
                    {kRHip, kLHip},           {kRKnee, kLKnee},   {kRAnkle, kLAnkle}};
    return s;
}

void SkeletonSpec::validate() const {
    const int k = static_cast<int>(joint_names.size());
    if (k < 1) throw std::invalid_argument("skeleton: no joints");
    if (root < 0 || root >= k) throw std::invalid_argument("skeleton: root out of range");
    std::vector<bool> placed(k, false);
    placed[root] = true;
    for (const auto& b : bones) {
        if (b.joint < 0 || b.joint >= k || b.parent < 0 || b.parent >= k)
            throw std::invalid_argument("skeleton: bone references an unknown joint");
        if (!placed[b.parent])
            throw std::invalid_argument("skeleton: parent of " + joint_names[b.joint] + " is not placed before it");
        if (placed[b.joint]) throw std::invalid_argument("skeleton: joint " + joint_names[b.joint] + " placed twice");
        if (!(b.length > 0)) throw std::invalid_argument("skeleton: bone lengths must be positive");
        if (b.min_angle_deg > b.max_angle_deg) throw std::invalid_argument("skeleton: empty angle range");
        placed[b.joint] = true;
    }
    if (std::find(placed.begin(), placed.end(), false) != placed.end())
        throw std::invalid_argument("skeleton: some joints are not connected to the root");
    header().flip_permutation();
    if (head_top == root) throw std::invalid_argument("skeleton: head segment has zero length");
}

DatasetHeader SkeletonSpec::header() const {
    DatasetHeader h;
    h.joint_names = joint_names;
    h.flip_pairs = flip_pairs;
    return h;
}

Sample generate_sample(const SkeletonSpec& spec, const SynthOptions& opt, std::size_t index) {
    const int size = opt.image_size;
    std::seed_seq seq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

    const std::size_t k = spec.joint_names.size();
    const double height = uniform(opt.min_height_fraction, opt.max_height_fraction) * size;
    const double tilt = uniform(-spec.max_body_tilt_deg, spec.max_body_tilt_deg);

    // Pose relative to the root, in pixels.
    std::vector<Point2> rel(k);
    std::vector<double> bone_angle(k, 0.0);
    for (const auto& b : spec.bones) {
        double angle = uniform(b.min_angle_deg, b.max_angle_deg);
        if (b.relative) angle += bone_angle[b.parent];
        bone_angle[b.joint] = angle;
        rel[b.joint] = rel[b.parent] + (b.length * height) * direction(angle - tilt);
    }

    double minx = 1e300, maxx = -1e300, miny = 1e300, maxy = -1e300;
    for (const auto& p : rel) {
        minx = std::min(minx, p.x);
        maxx = std::max(maxx, p.x);
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    const double pad = 0.05 * height;
    minx -= pad, maxx += pad, miny -= pad, maxy += pad;
    const double bw = maxx - minx, bh = maxy - miny;

    // Root placement: keep the box inside the image, or push it across a border.
    Point2 root;
    const bool truncate = u(rng) < opt.truncation_probability;
    const double slack_x = std::max(0.0, size - bw), slack_y = std::max(0.0, size - bh);
    root.x = -minx + slack_x * u(rng);
    root.y = -miny + slack_y * u(rng);
    if (truncate) {
        const int side = static_cast<int>(u(rng) * 4) % 4;
        const double overhang = uniform(0.1, 0.3) * height;
        switch (side) {
            case 0: root.x = -minx - overhang; break;
            case 1: root.x = size - maxx + overhang; break;
            case 2: root.y = -miny - overhang; break;
            default: root.y = size - maxy + overhang; break;
        }
    }

    Annotation ann;
    ann.joints.resize(k);
    ann.present.assign(k, false);
    ann.visible.assign(k, false);
    for (std::size_t j = 0; j < k; ++j) {
        const Point2 p = root + rel[j];
        ann.joints[j] = {quantize(p.x), quantize(p.y)};
        const bool inside = p.x >= 0 && p.y >= 0 && p.x < size && p.y < size;
        ann.present[j] = inside;
        ann.visible[j] = inside;
    }
    ann.center = {quantize(root.x + (minx + maxx) / 2), quantize(root.y + (miny + maxy) / 2)};
    ann.scale = quantize(opt.window_margin * height / kScaleToPixels);
    ann.norm_length = quantize(distance(rel[spec.head_top], rel[spec.root]));
    ann.image = "images/" + std::to_string(index) + ".png";

    Canvas canvas(size);
    paint_background(canvas, rng, opt.max_distractors);

    auto jitter = [&](Color c) {
        for (auto& ch : c) ch = std::clamp(ch + uniform(-25, 25), 0.0, 255.0);
        return c;
    };
    const Color torso = jitter({200, 60, 60}), head = jitter({235, 195, 150}), upper_arm = jitter({60, 160, 225}),
                forearm = jitter({60, 225, 140}), thigh = jitter({225, 205, 60}), shin = jitter({180, 80, 225});
    auto at = [&](int j) { return root + rel[j]; };

    if (k == kNumJoints) {
        const Point2 pelvis = 0.5 * (at(kRHip) + at(kLHip));
        canvas.capsule(at(kNeck), pelvis, 0.07 * height, torso);
        canvas.capsule(at(kRShoulder), at(kLShoulder), 0.035 * height, torso);
        canvas.capsule(at(kRHip), at(kLHip), 0.04 * height, torso);
        for (auto [hip, knee, ankle] : {std::array{kRHip, kRKnee, kRAnkle}, std::array{kLHip, kLKnee, kLAnkle}}) {
            canvas.capsule(at(hip), at(knee), 0.035 * height, thigh);
            canvas.capsule(at(knee), at(ankle), 0.03 * height, shin);
        }
        const Point2 neck = at(kNeck), top = at(kHeadTop);
        canvas.capsule(neck + 0.55 * (top - neck), neck + 0.55 * (top - neck), 0.45 * distance(top, neck), head);
        for (auto [sh, el, wr] : {std::array{kRShoulder, kRElbow, kRWrist}, std::array{kLShoulder, kLElbow, kLWrist}}) {
            canvas.capsule(at(sh), at(el), 0.03 * height, upper_arm);
            canvas.capsule(at(el), at(wr), 0.025 * height, forearm);
        }
    } else {
        for (const auto& b : spec.bones) canvas.capsule(at(b.parent), at(b.joint), 0.03 * height, upper_arm);
    }

    if (u(rng) < opt.occlusion_probability) {
        std::vector<int> candidates;
        for (const auto& b : spec.bones)
            if (b.parent != spec.root && ann.present[b.joint]) candidates.push_back(b.joint);
        if (candidates.empty())
            for (std::size_t j = 0; j < k; ++j)
                if (ann.present[j]) candidates.push_back(static_cast<int>(j));
        if (!candidates.empty()) {
            const int target = candidates[static_cast<std::size_t>(u(rng) * candidates.size()) % candidates.size()];
            const double w = uniform(0.15, 0.3) * height, h = uniform(0.15, 0.3) * height;
            const Point2 c = at(target) + Point2{uniform(-0.25, 0.25) * w, uniform(-0.25, 0.25) * h};
            canvas.rect(c.x, c.y, w, h, Color{255 * u(rng), 255 * u(rng), 255 * u(rng)});
            for (std::size_t j = 0; j < k; ++j) {
                const Point2 p = at(static_cast<int>(j));
                if (ann.present[j] && std::abs(p.x - c.x) <= w / 2 && std::abs(p.y - c.y) <= h / 2)
                    ann.visible[j] = false;
            }
        }
    }

    Sample s;
    s.image = canvas.to_image();
    s.annotation = std::move(ann);
    return s;
}

Dataset generate(const SkeletonSpec& spec, std::size_t count, const SynthOptions& options) {
    spec.validate();
    if (count < 1) throw std::invalid_argument("synth: count must be >= 1");
    if (options.image_size < kMinSynthImageSize)
        throw std::invalid_argument("synth: image size " + std::to_string(options.image_size) +
                                    " is too small for the figure (minimum " + std::to_string(kMinSynthImageSize) +
                                    ")");
    if (!(options.min_height_fraction > 0) || options.max_height_fraction < options.min_height_fraction ||
        options.max_height_fraction > 1)
        throw std::invalid_argument("synth: figure height fractions must satisfy 0 < min <= max <= 1");
    Dataset d;
    d.header = spec.header();
    d.samples.reserve(count);
    for (std::size_t i = 0; i < count; ++i) d.samples.push_back(generate_sample(spec, options, i));
    return d;
}

}  // namespace hg
