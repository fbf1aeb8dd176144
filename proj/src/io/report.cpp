#include <algorithm>
#include <cstdio>
#include <sstream>

#include "hg/io.hpp"

namespace hg {

std::string format_number(std::optional<double> value) {
    if (!value) return "";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", *value);
    return buf;
}

std::string training_log_header(int num_stacks) {
    std::string h = "iteration,lr,train_loss";
    for (int s = 0; s < num_stacks; ++s) h += ",val_acc_stack" + std::to_string(s);
    return h + "\n";
}

std::string training_log_row(const LogRow& row) {
    std::string r = std::to_string(row.iteration) + "," + format_number(row.lr) + "," + format_number(row.train_loss);
    for (const auto& a : row.stack_accuracy) r += "," + format_number(a);
    return r + "\n";
}

std::string eval_report_csv(const EvalReport& report) {
    std::string out = "joint,threshold,pck_all,pck_visible,pck_occluded,count_all,count_visible,count_occluded\n";
    const std::size_t k = report.joint_names.size();
    for (std::size_t j = 0; j <= k; ++j) {
        const bool total = j == k;
        const std::string name = total ? "Total" : report.joint_names[j];
        for (std::size_t t = 0; t < report.curve.thresholds.size(); ++t) {
            const PckResult* parts[3] = {&report.curve.points[t], &report.curve_visible.points[t],
                                         &report.curve_occluded.points[t]};
            out += name + "," + format_number(report.curve.thresholds[t]);
            for (const PckResult* p : parts) out += "," + format_number(total ? p->total : p->per_joint[j]);
            for (const PckResult* p : parts) {
                std::size_t n = 0;
                if (total)
                    for (auto c : p->counted) n += c;
                else
                    n = p->counted[j];
                out += "," + std::to_string(n);
            }
            out += "\n";
        }
    }
    return out;
}

namespace {

std::optional<double> mean_auc(const std::vector<PresenceCurve>& curves, const std::vector<int>& group) {
    double s = 0;
    int n = 0;
    for (int j : group)
        if (curves[j].auc) {
            s += *curves[j].auc;
            ++n;
        }
    if (!n) return std::nullopt;
    return s / n;
}

std::string cell(std::optional<double> v) {
    if (!v) return "-";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100 * *v);
    return buf;
}

}  // namespace

std::string summary_table(const EvalReport& report) {
    const auto groups = summary_groups(report.joint_names);
    std::ostringstream os;
    char buf[64];
    auto row = [&](const std::string& label, auto value) {
        std::snprintf(buf, sizeof buf, "%-22s", label.c_str());
        os << buf;
        for (const auto& [name, members] : groups) {
            std::snprintf(buf, sizeof buf, "%9s", value(members).c_str());
            os << buf;
        }
        os << "\n";
    };
    std::snprintf(buf, sizeof buf, "PCK@%g (%%)", report.reference_threshold);
    std::string title = buf;
    std::snprintf(buf, sizeof buf, "%-22s", title.c_str());
    os << buf;
    for (const auto& g : groups) {
        std::snprintf(buf, sizeof buf, "%9s", g.first.c_str());
        os << buf;
    }
    os << "\n";
    const auto& ref = report.at_reference;
    row("all", [&](const std::vector<int>& m) { return cell(group_accuracy(ref.all, m)); });
    row("visible", [&](const std::vector<int>& m) { return cell(group_accuracy(ref.visible, m)); });
    row("occluded", [&](const std::vector<int>& m) { return cell(group_accuracy(ref.occluded, m)); });
    row("presence AUC (mean)", [&](const std::vector<int>& m) { return cell(mean_auc(report.presence_mean, m)); });
    row("presence AUC (max)", [&](const std::vector<int>& m) { return cell(mean_auc(report.presence_max, m)); });
    return os.str();
}

std::string pck_curve_svg(const EvalReport& report, const std::string& title) {
    const double w = 560, h = 400, left = 60, right = 150, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    const double tmax = report.curve.thresholds.empty() ? 1.0 : std::max(report.curve.thresholds.back(), 1e-9);
    auto px = [&](double t) { return left + pw * t / tmax; };
    auto py = [&](double a) { return top + ph * (1 - a); };
    static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                   "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << left + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double a = i / 5.0, t = tmax * i / 5.0;
        os << "<line x1=\"" << left - 4 << "\" y1=\"" << py(a) << "\" x2=\"" << left + pw << "\" y2=\"" << py(a)
           << "\" stroke=\"#ddd\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << py(a) + 4 << "\" text-anchor=\"end\">" << 20 * i << "</text>\n";
        os << "<text x=\"" << px(t) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << format_number(t)
           << "</text>\n";
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 10 << "\" text-anchor=\"middle\">normalized distance</text>\n";
    os << "<text transform=\"translate(16," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">detection rate (%)</text>\n";
    const auto groups = summary_groups(report.joint_names);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const char* color = colors[g % 10];
        std::string points;
        for (std::size_t t = 0; t < report.curve.thresholds.size(); ++t) {
            const auto a = group_accuracy(report.curve.points[t], groups[g].second);
            if (!a) continue;
            points += format_number(px(report.curve.thresholds[t])) + "," + format_number(py(*a)) + " ";
        }
        const bool total = groups[g].first == "Total";
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << (total ? 3 : 1.5)
           << "\" points=\"" << points << "\"/>\n";
        const double ly = top + 14 + 18 * static_cast<double>(g);
        os << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 40 << "\" y2=\""
           << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"3\"/>\n";
        os << "<text x=\"" << left + pw + 46 << "\" y=\"" << ly << "\">" << groups[g].first << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace hg
