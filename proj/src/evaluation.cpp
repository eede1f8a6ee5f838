#include "coalab/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "coalab/io.hpp"

namespace coalab {

namespace {

void require_nonempty(std::span<const EpisodeRecord> records, const char* what) {
    if (records.empty()) {
        throw std::invalid_argument(std::string(what) + ": no episodes");
    }
}

double episodes(std::span<const EpisodeRecord> records) { return static_cast<double>(records.size()); }

}  // namespace

double completion_rate(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "completion_rate");
    double done = 0.0;
    for (const auto& r : records) {
        done += r.completed ? 1.0 : 0.0;
    }
    return done / episodes(records);
}

double collisions_per_1k(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "collisions_per_1k");
    double sum = 0.0;
    for (const auto& r : records) {
        sum += r.alpha + r.beta;
    }
    return 1000.0 * sum / episodes(records);
}

double mean_steps(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "mean_steps");
    double sum = 0.0;
    for (const auto& r : records) {
        sum += r.phi;
    }
    return sum / episodes(records);
}

double mean_steps_completed(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "mean_steps_completed");
    double sum = 0.0;
    double n = 0.0;
    for (const auto& r : records) {
        if (r.completed) {
            sum += r.phi;
            n += 1.0;
        }
    }
    return n > 0.0 ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double accuracy(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "accuracy");
    double reached = 0.0;
    double total = 0.0;
    for (const auto& r : records) {
        reached += r.targets_reached;
        total += r.targets_total;
    }
    return total > 0.0 ? 100.0 * reached / total : 100.0;
}

double completion_time(std::span<const EpisodeRecord> records) {
    require_nonempty(records, "completion_time");
    double sum = 0.0;
    for (const auto& r : records) {
        sum += r.phi;
    }
    return sum / episodes(records);
}

std::vector<MetricRow> summarize(const std::string& method, const std::string& config,
                                 std::span<const EpisodeRecord> records) {
    return {
        {method, config, "episodes", episodes(records)},
        {method, config, "completion_rate", completion_rate(records)},
        {method, config, "collisions_per_1k", collisions_per_1k(records)},
        {method, config, "mean_steps_all", mean_steps(records)},
        {method, config, "mean_steps_completed", mean_steps_completed(records)},
        {method, config, "accuracy_pct", accuracy(records)},
        {method, config, "completion_time", completion_time(records)},
    };
}

void write_metric_table(const std::vector<MetricRow>& rows, const std::filesystem::path& path) {
    std::string out = "method,config,metric,value\n";
    for (const auto& r : rows) {
        for (const auto* field : {&r.method, &r.config, &r.metric}) {
            if (field->find_first_of(",\n\"") != std::string::npos) {
                throw std::invalid_argument("metric table field '" + *field + "' contains a separator");
            }
        }
        out += r.method + "," + r.config + "," + r.metric + "," +
               (std::isnan(r.value) ? std::string("nan") : format_double(r.value)) + "\n";
    }
    write_file_atomic(path, out);
}

std::vector<MetricRow> read_metric_table(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    std::string line;
    std::getline(in, line);
    if (line != "method,config,metric,value") {
        throw std::runtime_error(path.string() + ": unexpected metric table header");
    }
    std::vector<MetricRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            cells.push_back(cell);
        }
        if (cells.size() != 4) {
            throw std::runtime_error(path.string() + " line " + std::to_string(line_no) + ": expected 4 columns");
        }
        const double v = cells[3] == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_double(cells[3]);
        rows.push_back({cells[0], cells[1], cells[2], v});
    }
    return rows;
}

void write_episode_table(std::span<const EpisodeRecord> records, const std::filesystem::path& path) {
    std::string out = "episode,phi,alpha,beta,completed,targets_total,targets_reached\n";
    for (std::size_t e = 0; e < records.size(); ++e) {
        const auto& r = records[e];
        out += fmt::format("{},{},{},{},{},{},{}\n", e, r.phi, r.alpha, r.beta, r.completed ? 1 : 0, r.targets_total,
                           r.targets_reached);
    }
    write_file_atomic(path, out);
}

std::string episode_log_csv(const EpisodeRecord& record) {
    std::string out = "step,entity_kind,entity_id,x,y,event\n";
    auto emit = [&out](const std::vector<VehiclePath>& paths, const char* kind) {
        for (std::size_t id = 0; id < paths.size(); ++id) {
            const auto& path = paths[id];
            for (std::size_t t = 0; t < path.size(); ++t) {
                const char* event = "";
                if (t > 0 && path[t].airborne != path[t - 1].airborne) {
                    event = path[t].airborne ? "launch" : "land";
                }
                out += fmt::format("{},{},{},{},{},{}\n", t, kind, id, format_double(path[t].pos.x),
                                   format_double(path[t].pos.y), event);
            }
        }
    };
    emit(record.ugv_paths, "ugv");
    emit(record.uav_paths, "uav");
    return out;
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 360.0;
constexpr double kMargin = 48.0;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string svg_open() {
    return fmt::format(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
        "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        kWidth, kHeight);
}

std::string axes(double lo, double hi, const std::string& title) {
    std::string s = fmt::format(
        "<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n"
        "<line x1=\"{0}\" y1=\"{3}\" x2=\"{0}\" y2=\"{1}\" stroke=\"black\"/>\n",
        kMargin, kHeight - kMargin, kWidth - kMargin, kMargin);
    s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n", kWidth / 2,
                     kMargin / 2, title);
    s += fmt::format("<text x=\"4\" y=\"{}\" font-size=\"10\">{:.3g}</text>\n", kHeight - kMargin, lo);
    s += fmt::format("<text x=\"4\" y=\"{}\" font-size=\"10\">{:.3g}</text>\n", kMargin + 4, hi);
    return s;
}

double y_of(double v, double lo, double hi) {
    const double span = hi > lo ? hi - lo : 1.0;
    return kHeight - kMargin - (v - lo) / span * (kHeight - 2 * kMargin);
}

}  // namespace

std::string bar_chart_svg(const std::vector<MetricRow>& rows, const std::string& metric) {
    std::vector<std::string> configs;
    std::vector<std::string> methods;
    std::map<std::pair<std::string, std::string>, double> value;
    for (const auto& r : rows) {
        if (r.metric != metric || std::isnan(r.value)) {
            continue;
        }
        if (std::find(configs.begin(), configs.end(), r.config) == configs.end()) {
            configs.push_back(r.config);
        }
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
            methods.push_back(r.method);
        }
        value[{r.config, r.method}] = r.value;
    }
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& [k, v] : value) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    std::string s = svg_open() + axes(lo, hi, metric);
    const double group_w = configs.empty() ? 0.0 : (kWidth - 2 * kMargin) / static_cast<double>(configs.size());
    const double bar_w = methods.empty() ? 0.0 : group_w * 0.8 / static_cast<double>(methods.size());
    for (std::size_t c = 0; c < configs.size(); ++c) {
        const double gx = kMargin + group_w * static_cast<double>(c) + group_w * 0.1;
        for (std::size_t m = 0; m < methods.size(); ++m) {
            auto it = value.find({configs[c], methods[m]});
            if (it == value.end()) {
                continue;
            }
            const double y0 = y_of(0.0, lo, hi);
            const double y1 = y_of(it->second, lo, hi);
            s += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"/>\n",
                             gx + bar_w * static_cast<double>(m), std::min(y0, y1), bar_w, std::abs(y1 - y0),
                             kPalette[m % std::size(kPalette)]);
        }
        s += fmt::format("<text x=\"{:.2f}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\">{}</text>\n",
                         gx + group_w * 0.4, kHeight - kMargin + 14, configs[c]);
    }
    for (std::size_t m = 0; m < methods.size(); ++m) {
        s += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\">{}</text>\n", kWidth - kMargin - 100,
                         kMargin + 12 * static_cast<double>(m + 1), kPalette[m % std::size(kPalette)], methods[m]);
    }
    return s + "</svg>\n";
}

std::string learning_curve_svg(const std::vector<CurveSeries>& series, std::size_t window) {
    window = std::max<std::size_t>(window, 1);
    std::vector<std::vector<double>> smoothed;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t longest = 1;
    for (const auto& s : series) {
        std::vector<double> v;
        double acc = 0.0;
        for (std::size_t i = 0; i < s.rows.size(); ++i) {
            acc += s.rows[i].episode_return;
            if (i >= window) {
                acc -= s.rows[i - window].episode_return;
            }
            v.push_back(acc / static_cast<double>(std::min(i + 1, window)));
            lo = std::min(lo, v.back());
            hi = std::max(hi, v.back());
        }
        longest = std::max(longest, v.size());
        smoothed.push_back(std::move(v));
    }
    if (!std::isfinite(lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    std::string out = svg_open() + axes(lo, hi, "episode return");
    for (std::size_t k = 0; k < smoothed.size(); ++k) {
        std::string pts;
        for (std::size_t i = 0; i < smoothed[k].size(); ++i) {
            const double x = kMargin + (kWidth - 2 * kMargin) * static_cast<double>(i) / static_cast<double>(longest);
            pts += fmt::format("{:.2f},{:.2f} ", x, y_of(smoothed[k][i], lo, hi));
        }
        const char* colour = kPalette[k % std::size(kPalette)];
        out += fmt::format("<polyline fill=\"none\" stroke=\"{}\" points=\"{}\"/>\n", colour, pts);
        out += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\">{}</text>\n", kWidth - kMargin - 100,
                           kMargin + 12 * static_cast<double>(k + 1), colour, series[k].name);
    }
    return out + "</svg>\n";
}

}  // namespace coalab
