#include "hg/eval.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <numeric>
#include <stdexcept>

namespace hg {

DecodedPeak decode(std::span<const float> hm, int width, int height, bool quarter_offset) {
    if (width <= 0 || height <= 0 || hm.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("decode: heatmap size does not match " + std::to_string(width) + "x" +
                                    std::to_string(height));
    std::size_t best = 0;
    bool all_equal = true;
    for (std::size_t i = 1; i < hm.size(); ++i) {
        if (hm[i] != hm[0]) all_equal = false;
        if (hm[i] > hm[best]) best = i;
    }
    if (all_equal) return {0, 0, true};
    const int px = static_cast<int>(best % width), py = static_cast<int>(best / width);
    DecodedPeak peak{static_cast<double>(px), static_cast<double>(py), false};
    if (!quarter_offset) return peak;
    auto at = [&](int x, int y) { return hm[static_cast<std::size_t>(y) * width + x]; };
    if (px > 0 && px < width - 1) {
        const float right = at(px + 1, py), left = at(px - 1, py);
        if (right > left) peak.x += 0.25;
        else if (right < left) peak.x -= 0.25;
    }
    if (py > 0 && py < height - 1) {
        const float down = at(px, py + 1), up = at(px, py - 1);
        if (down > up) peak.y += 0.25;
        else if (down < up) peak.y -= 0.25;
    }
    return peak;
}

Point2 heatmap_to_original(double hx, double hy, int input_resolution, int output_resolution,
                           const Affine2& original_to_crop) {
    const double f = static_cast<double>(input_resolution) / output_resolution;
    return original_to_crop.inverse().apply({(hx + 0.5) * f, (hy + 0.5) * f});
}

TensorF mirror_heatmaps(const TensorF& heatmaps, const std::vector<int>& perm) {
    if (heatmaps.rank() != 4) throw std::invalid_argument("mirror_heatmaps: expected [N,K,R,R]");
    const std::size_t n = heatmaps.dim(0), k = heatmaps.dim(1), h = heatmaps.dim(2), w = heatmaps.dim(3);
    if (perm.size() != k) throw std::invalid_argument("mirror_heatmaps: permutation size does not match channels");
    check_involution(perm);
    TensorF out(heatmaps.shape());
    auto src = heatmaps.data();
    auto dst = out.data();
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t c = 0; c < k; ++c) {
            const float* in = src.data() + (s * k + static_cast<std::size_t>(perm[c])) * h * w;
            float* o = dst.data() + (s * k + c) * h * w;
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) o[y * w + x] = in[y * w + (w - 1 - x)];
        }
    return out;
}

namespace {

TensorF mirror_images(const TensorF& images) {
    const int planes = static_cast<int>(images.dim(0) * images.dim(1));
    return TensorF(images.shape(), mirror_planar(images.data(), planes, static_cast<int>(images.dim(2)),
                                                 static_cast<int>(images.dim(3))));
}

TensorF average(const TensorF& a, const TensorF& b) {
    TensorF out(a.shape());
    auto x = a.data();
    auto y = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = 0.5f * (x[i] + y[i]);
    return out;
}

}  // namespace

TensorF predict_with_flip(StackedModelParams<float>& model, const TensorF& images, const std::vector<int>& flip_perm) {
    check_involution(flip_perm);
    if (static_cast<int>(flip_perm.size()) != model.config.num_joints)
        throw std::invalid_argument("predict_with_flip: permutation covers " + std::to_string(flip_perm.size()) +
                                    " joints, model predicts " + std::to_string(model.config.num_joints));
    Graph<float> g(false);
    const TensorF direct = stacked_forward(g, images, model, Mode::eval).back();
    const TensorF mirrored = stacked_forward(g, mirror_images(images), model, Mode::eval).back();
    return average(direct, mirror_heatmaps(mirrored, flip_perm));
}

PosePrediction decode_pose(std::span<const float> heatmaps, int joints, int resolution, int input_resolution,
                           const Affine2& original_to_crop) {
    const std::size_t plane = static_cast<std::size_t>(resolution) * resolution;
    if (heatmaps.size() != plane * joints) throw std::invalid_argument("decode_pose: heatmap size mismatch");
    PosePrediction pose(joints);
    for (int k = 0; k < joints; ++k) {
        auto hm = heatmaps.subspan(k * plane, plane);
        const DecodedPeak peak = decode(hm, resolution, resolution);
        pose[k].position = heatmap_to_original(peak.x, peak.y, input_resolution, resolution, original_to_crop);
        pose[k].max_activation = *std::max_element(hm.begin(), hm.end());
        double s = 0;
        for (float v : hm) s += v;
        pose[k].mean_activation = s / static_cast<double>(plane);
    }
    return pose;
}

std::vector<std::vector<PosePrediction>> predict_dataset(StackedModelParams<float>& model, const Dataset& data,
                                                         const PredictOptions& options) {
    const auto& cfg = model.config;
    if (data.header.num_joints() != cfg.num_joints)
        throw std::invalid_argument("predict: dataset has " + std::to_string(data.header.num_joints()) +
                                    " joints, model predicts " + std::to_string(cfg.num_joints));
    const std::vector<int> perm = data.header.flip_permutation();
    const int in_res = cfg.input_resolution, out_res = cfg.output_resolution;
    const std::size_t in_plane = 3 * static_cast<std::size_t>(in_res) * in_res;
    const std::size_t hm_size = static_cast<std::size_t>(cfg.num_joints) * out_res * out_res;
    const std::size_t batch = static_cast<std::size_t>(std::max(1, options.batch_size));

    std::vector<std::vector<PosePrediction>> out(cfg.num_stacks, std::vector<PosePrediction>(data.size()));
    for (std::size_t start = 0; start < data.size(); start += batch) {
        const std::size_t count = std::min(batch, data.size() - start);
        std::vector<float> pixels(count * in_plane);
        std::vector<Affine2> transforms(count);
        for (std::size_t i = 0; i < count; ++i) {
            const auto& s = data.samples[start + i];
            CropResult crop = crop_and_resize(s.image, s.annotation.center, s.annotation.scale, in_res);
            std::copy(crop.pixels.begin(), crop.pixels.end(), pixels.begin() + i * in_plane);
            transforms[i] = crop.original_to_crop;
        }
        TensorF images(Shape{count, 3, std::size_t(in_res), std::size_t(in_res)}, std::move(pixels));
        Graph<float> g(false);
        std::vector<TensorF> heat = stacked_forward(g, images, model, Mode::eval);
        if (options.flip) {
            const TensorF mirrored = stacked_forward(g, mirror_images(images), model, Mode::eval).back();
            heat.back() = average(heat.back(), mirror_heatmaps(mirrored, perm));
        }
        for (std::size_t st = 0; st < heat.size(); ++st) {
            auto values = heat[st].data();
            for (std::size_t i = 0; i < count; ++i)
                out[st][start + i] = decode_pose(values.subspan(i * hm_size, hm_size), cfg.num_joints, out_res,
                                                 in_res, transforms[i]);
        }
    }
    return out;
}

std::vector<std::vector<Point2>> positions(std::span<const PosePrediction> predictions) {
    std::vector<std::vector<Point2>> out;
    out.reserve(predictions.size());
    for (const auto& pose : predictions) {
        std::vector<Point2> pts;
        pts.reserve(pose.size());
        for (const auto& j : pose) pts.push_back(j.position);
        out.push_back(std::move(pts));
    }
    return out;
}

PckResult pck(std::span<const std::vector<Point2>> predictions, std::span<const Annotation> annotations,
              double threshold, JointFilter filter) {
    if (predictions.size() != annotations.size())
        throw std::invalid_argument("pck: " + std::to_string(predictions.size()) + " predictions for " +
                                    std::to_string(annotations.size()) + " annotations");
    const std::size_t k = annotations.empty() ? 0 : annotations[0].num_joints();
    PckResult r;
    r.correct.assign(k, 0);
    r.counted.assign(k, 0);
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& a = annotations[i];
        if (a.num_joints() != k || predictions[i].size() != k)
            throw std::invalid_argument("pck: sample " + std::to_string(i) + " has a different joint count");
        for (std::size_t j = 0; j < k; ++j) {
            if (!a.present[j]) continue;
            if (filter == JointFilter::visible && !a.visible[j]) continue;
            if (filter == JointFilter::occluded && a.visible[j]) continue;
            ++r.counted[j];
            if (distance(predictions[i][j], a.joints[j]) / a.norm_length <= threshold) ++r.correct[j];
        }
    }
    std::size_t tc = 0, tn = 0;
    r.per_joint.resize(k);
    for (std::size_t j = 0; j < k; ++j) {
        if (r.counted[j]) r.per_joint[j] = static_cast<double>(r.correct[j]) / static_cast<double>(r.counted[j]);
        tc += r.correct[j];
        tn += r.counted[j];
    }
    if (tn) r.total = static_cast<double>(tc) / static_cast<double>(tn);
    return r;
}

PckCurve pck_curve(std::span<const std::vector<Point2>> predictions, std::span<const Annotation> annotations,
                   std::span<const double> thresholds, JointFilter filter) {
    if (thresholds.empty()) throw std::invalid_argument("pck_curve: no thresholds");
    if (!std::is_sorted(thresholds.begin(), thresholds.end()))
        throw std::invalid_argument("pck_curve: thresholds must be sorted ascending");
    PckCurve c;
    c.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double t : thresholds) c.points.push_back(pck(predictions, annotations, t, filter));
    return c;
}

VisibilitySplit visibility_split_eval(std::span<const std::vector<Point2>> predictions,
                                      std::span<const Annotation> annotations, double threshold) {
    return {pck(predictions, annotations, threshold, JointFilter::all),
            pck(predictions, annotations, threshold, JointFilter::visible),
            pck(predictions, annotations, threshold, JointFilter::occluded)};
}

PresenceCurve presence_pr(std::span<const double> statistic, std::span<const bool> present) {
    if (statistic.size() != present.size())
        throw std::invalid_argument("presence_pr: statistic and label counts differ");
    const std::size_t n = statistic.size();
    const std::size_t positives = static_cast<std::size_t>(std::count(present.begin(), present.end(), true));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return statistic[a] > statistic[b]; });

    PresenceCurve curve;
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < n;) {
        const double t = statistic[order[i]];
        for (; i < n && statistic[order[i]] == t; ++i) (present[order[i]] ? tp : fp)++;
        const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = positives ? static_cast<double>(tp) / static_cast<double>(positives) : 0.0;
        curve.points.push_back({precision, recall, t});
    }
    if (positives == 0 || positives == n) return curve;
    double area = 0, prev_r = 0, prev_p = curve.points.front().precision;
    for (const auto& p : curve.points) {
        area += (p.recall - prev_r) * (p.precision + prev_p) / 2;
        prev_r = p.recall;
        prev_p = p.precision;
    }
    curve.auc = area;
    return curve;
}

namespace {

std::string group_label(const std::string& joint) {
    std::string name = joint;
    std::transform(name.begin(), name.end(), name.begin(), [](unsigned char c) { return std::tolower(c); });
    if (name.find("head") != std::string::npos || name.find("neck") != std::string::npos ||
        name.find("nose") != std::string::npos)
        return "Head";
    for (const char* prefix : {"left_", "right_", "l_", "r_"}) {
        const std::string p(prefix);
        if (name.rfind(p, 0) == 0) {
            name = name.substr(p.size());
            break;
        }
    }
    if (!name.empty()) name[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(name[0])));
    return name;
}

}  // namespace

std::vector<std::pair<std::string, std::vector<int>>> summary_groups(const std::vector<std::string>& joint_names) {
    static const std::vector<std::string> canonical = {"Head", "Shoulder", "Elbow", "Wrist", "Hip", "Knee", "Ankle"};
    std::map<std::string, std::vector<int>> members;
    std::vector<std::string> extra;
    for (int j = 0; j < static_cast<int>(joint_names.size()); ++j) {
        const std::string label = group_label(joint_names[j]);
        if (members[label].empty() && std::find(canonical.begin(), canonical.end(), label) == canonical.end())
            extra.push_back(label);
        members[label].push_back(j);
    }
    std::vector<std::pair<std::string, std::vector<int>>> out;
    for (const auto& c : canonical)
        if (members.count(c)) out.emplace_back(c, members[c]);
    for (const auto& e : extra) out.emplace_back(e, members[e]);
    std::vector<int> all(joint_names.size());
    std::iota(all.begin(), all.end(), 0);
    out.emplace_back("Total", all);
    return out;
}

std::optional<double> group_accuracy(const PckResult& result, const std::vector<int>& group) {
    std::size_t c = 0, n = 0;
    for (int j : group) {
        c += result.correct.at(j);
        n += result.counted.at(j);
    }
    if (!n) return std::nullopt;
    return static_cast<double>(c) / static_cast<double>(n);
}

std::vector<double> default_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 10; ++i) t.push_back(0.05 * i);
    return t;
}

EvalReport build_report(const DatasetHeader& header, std::span<const Annotation> annotations,
                        std::span<const PosePrediction> predictions, double reference_threshold,
                        std::span<const double> thresholds) {
    EvalReport r;
    r.joint_names = header.joint_names;
    r.reference_threshold = reference_threshold;
    const auto pts = positions(predictions);
    r.curve = pck_curve(pts, annotations, thresholds, JointFilter::all);
    r.curve_visible = pck_curve(pts, annotations, thresholds, JointFilter::visible);
    r.curve_occluded = pck_curve(pts, annotations, thresholds, JointFilter::occluded);
    r.at_reference = visibility_split_eval(pts, annotations, reference_threshold);
    const std::size_t k = header.joint_names.size();
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> mean_stat, max_stat;
        std::vector<bool> labels;
        for (std::size_t i = 0; i < annotations.size(); ++i) {
            mean_stat.push_back(predictions[i][j].mean_activation);
            max_stat.push_back(predictions[i][j].max_activation);
            labels.push_back(annotations[i].present[j]);
        }
        std::unique_ptr<bool[]> flags(new bool[labels.size()]);
        for (std::size_t i = 0; i < labels.size(); ++i) flags[i] = labels[i];
        std::span<const bool> lab(flags.get(), labels.size());
        r.presence_mean.push_back(presence_pr(mean_stat, lab));
        r.presence_max.push_back(presence_pr(max_stat, lab));
    }
    return r;
}

std::vector<std::optional<double>> stack_accuracies(StackedModelParams<float>& model, const Dataset& data,
                                                    double threshold, int batch_size) {
    PredictOptions opt;
    opt.batch_size = batch_size;
    const auto per_stack = predict_dataset(model, data, opt);
    std::vector<Annotation> anns;
    anns.reserve(data.size());
    for (const auto& s : data.samples) anns.push_back(s.annotation);
    std::vector<std::optional<double>> out;
    for (const auto& preds : per_stack) out.push_back(pck(positions(preds), anns, threshold).total);
    return out;
}

}  // namespace hg
