#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hg/io.hpp"
#include "json.hpp"

namespace hg {

using ojson = nlohmann::ordered_json;

AnnotationParseError::AnnotationParseError(std::size_t l, const std::string& what)
    : std::runtime_error("line " + std::to_string(l) + ": " + what), line(l) {}

namespace {

// Six decimal places, the precision the annotation format promises.
double round6(double v) { return std::round(v * 1e6) / 1e6; }

void require_keys(const ojson& obj, const std::set<std::string>& keys, std::size_t line) {
    if (!obj.is_object()) throw AnnotationParseError(line, "expected a JSON object");
    for (const auto& [k, _] : obj.items())
        if (!keys.count(k)) throw AnnotationParseError(line, "unknown key \"" + k + "\"");
    for (const auto& k : keys)
        if (!obj.contains(k)) throw AnnotationParseError(line, "missing key \"" + k + "\"");
}

double number(const ojson& v, std::size_t line, const std::string& what) {
    if (!v.is_number()) throw AnnotationParseError(line, what + " must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw AnnotationParseError(line, what + " must be finite");
    return d;
}

Point2 point(const ojson& v, std::size_t line, const std::string& what) {
    if (!v.is_array() || v.size() != 2) throw AnnotationParseError(line, what + " must be an [x, y] pair");
    return {number(v[0], line, what), number(v[1], line, what)};
}

std::vector<bool> flags(const ojson& v, std::size_t line, const std::string& what, std::size_t k) {
    if (!v.is_array()) throw AnnotationParseError(line, what + " must be an array");
    if (v.size() != k)
        throw AnnotationParseError(line, what + " has " + std::to_string(v.size()) + " entries, expected " +
                                             std::to_string(k));
    std::vector<bool> out;
    for (const auto& b : v) {
        if (!b.is_boolean()) throw AnnotationParseError(line, what + " entries must be booleans");
        out.push_back(b.get<bool>());
    }
    return out;
}

DatasetHeader parse_header(const ojson& j, std::size_t line) {
    require_keys(j, {"version", "num_joints", "joint_names", "flip_pairs"}, line);
    DatasetHeader h;
    if (!j["version"].is_number_integer() || j["version"].get<int>() != 1)
        throw AnnotationParseError(line, "unsupported version " + j["version"].dump());
    if (!j["num_joints"].is_number_integer() || j["num_joints"].get<int>() < 1)
        throw AnnotationParseError(line, "num_joints must be a positive integer");
    const int k = j["num_joints"].get<int>();
    if (!j["joint_names"].is_array()) throw AnnotationParseError(line, "joint_names must be an array");
    for (const auto& n : j["joint_names"]) {
        if (!n.is_string()) throw AnnotationParseError(line, "joint_names entries must be strings");
        h.joint_names.push_back(n.get<std::string>());
    }
    if (static_cast<int>(h.joint_names.size()) != k)
        throw AnnotationParseError(line, "joint_names has " + std::to_string(h.joint_names.size()) +
                                             " entries, num_joints is " + std::to_string(k));
    if (!j["flip_pairs"].is_array()) throw AnnotationParseError(line, "flip_pairs must be an array");
    for (const auto& p : j["flip_pairs"]) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer())
            throw AnnotationParseError(line, "flip_pairs entries must be [a, b] integer pairs");
        h.flip_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    try {
        h.flip_permutation();
    } catch (const std::invalid_argument& e) {
        throw AnnotationParseError(line, e.what());
    }
    return h;
}

Annotation parse_annotation(const ojson& j, std::size_t line, std::size_t k) {
    require_keys(j, {"image", "center", "scale", "joints", "present", "visible", "norm_length"}, line);
    Annotation a;
    if (!j["image"].is_string() || j["image"].get<std::string>().empty())
        throw AnnotationParseError(line, "image must be a non-empty string");
    a.image = j["image"].get<std::string>();
    a.center = point(j["center"], line, "center");
    a.scale = number(j["scale"], line, "scale");
    a.norm_length = number(j["norm_length"], line, "norm_length");
    const ojson& joints = j["joints"];
    if (!joints.is_array()) throw AnnotationParseError(line, "joints must be an array");
    if (joints.size() != k)
        throw AnnotationParseError(line, "joints has " + std::to_string(joints.size()) + " entries, expected " +
                                             std::to_string(k));
    for (const auto& p : joints) a.joints.push_back(point(p, line, "joint"));
    a.present = flags(j["present"], line, "present", k);
    a.visible = flags(j["visible"], line, "visible", k);
    try {
        a.validate(k);
    } catch (const std::invalid_argument& e) {
        throw AnnotationParseError(line, e.what());
    }
    return a;
}

ojson pair_json(Point2 p) { return ojson::array({round6(p.x), round6(p.y)}); }

}  // namespace

AnnotationFile parse_annotations(const std::string& text) {
    AnnotationFile file;
    std::istringstream in(text);
    std::string line;
    std::size_t number_ = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number_;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw AnnotationParseError(number_, std::string("invalid JSON: ") + e.what());
        }
        if (!have_header) {
            file.header = parse_header(j, number_);
            have_header = true;
        } else {
            file.annotations.push_back(parse_annotation(j, number_, file.header.joint_names.size()));
        }
    }
    if (!have_header) throw AnnotationParseError(number_ + 1, "missing header line");
    return file;
}

std::string serialize_annotations(const AnnotationFile& file) {
    std::string out;
    ojson h;
    h["version"] = file.header.version;
    h["num_joints"] = file.header.num_joints();
    h["joint_names"] = file.header.joint_names;
    h["flip_pairs"] = ojson::array();
    for (auto [a, b] : file.header.flip_pairs) h["flip_pairs"].push_back({a, b});
    out += h.dump() + "\n";
    for (const auto& a : file.annotations) {
        ojson j;
        j["image"] = a.image;
        j["center"] = pair_json(a.center);
        j["scale"] = round6(a.scale);
        j["joints"] = ojson::array();
        for (const auto& p : a.joints) j["joints"].push_back(pair_json(p));
        j["present"] = a.present;
        j["visible"] = a.visible;
        j["norm_length"] = round6(a.norm_length);
        out += j.dump() + "\n";
    }
    return out;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
}

AnnotationFile read_annotations(const fs::path& path) {
    const std::string text = read_text(path);
    try {
        return parse_annotations(text);
    } catch (const AnnotationParseError& e) {
        throw AnnotationParseError(e.line, path.string() + ": " + e.what());
    }
}

Dataset load_dataset(const fs::path& annotation_path) {
    AnnotationFile file = read_annotations(annotation_path);
    Dataset d;
    d.header = file.header;
    const fs::path base = annotation_path.parent_path();
    for (auto& a : file.annotations) {
        Sample s;
        s.image = read_png(base / a.image);
        s.annotation = std::move(a);
        d.samples.push_back(std::move(s));
    }
    return d;
}

fs::path export_dataset(const Dataset& data, const fs::path& directory) {
    auto make_dir = [](const fs::path& dir) {
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    };
    make_dir(directory);
    AnnotationFile file;
    file.header = data.header;
    for (const auto& s : data.samples) {
        const fs::path image_path = directory / s.annotation.image;
        make_dir(image_path.parent_path());
        write_png(image_path, s.image);
        file.annotations.push_back(s.annotation);
    }
    const fs::path path = directory / kAnnotationFileName;
    write_text(path, serialize_annotations(file));
    return path;
}

}  // namespace hg
