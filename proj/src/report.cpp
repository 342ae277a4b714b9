#include "nsnmf/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "nsnmf/errors.hpp"
#include "nsnmf/format.hpp"

namespace nsnmf {

std::string_view provenance_name(Provenance p) {
    return p == Provenance::computed ? "computed" : "published";
}

Provenance parse_provenance(std::string_view tag) {
    if (tag == "computed") return Provenance::computed;
    if (tag == "published") return Provenance::published;
    throw DataError("unknown provenance tag '" + std::string(tag) + "'");
}

void MetricsReport::add(std::string method, std::string dataset, std::string digest, std::string metric,
                        double value, Provenance provenance) {
    rows.push_back({std::move(method), std::move(dataset), std::move(digest), std::move(metric), value, provenance});
}

std::vector<MetricRow> MetricsReport::select(Provenance provenance) const {
    std::vector<MetricRow> out;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(out),
                 [provenance](const MetricRow& r) { return r.provenance == provenance; });
    return out;
}

MetricsReport MetricsReport::published_reference() {
    struct Published {
        const char* method;
        std::array<double, 3> rmse;  // filmtrust, ml100k, amusic
    };
    static constexpr std::array<Published, 12> table{{
        {"user-cf", {0.963, 1.005, 1.011}},
        {"item-cf", {0.822, 1.001, 0.934}},
        {"svd", {1.006, 1.018, 2.024}},
        {"nmf", {0.845, 0.954, 1.001}},
        {"reg-nmf", {0.840, 0.937, 0.975}},
        {"rbm", {0.918, 1.008, 1.104}},
        {"dmf", {0.821, 0.948, 0.946}},
        {"nsnmf-relu", {0.816, 0.904, 0.889}},
        {"nsnmf-softplus", {0.804, 0.896, 0.871}},
        {"nsnmf-relu-bias", {0.788, 0.887, 0.836}},
        {"nsnmf-relu-2layer", {0.816, 0.904, 0.889}},
        {"nsnmf-relu-3layer", {0.842, 0.938, 0.932}},
    }};
    static constexpr std::array<const char*, 3> datasets{"filmtrust", "ml100k", "amusic"};
    MetricsReport report;
    for (const auto& row : table)
        for (std::size_t d = 0; d < datasets.size(); ++d)
            report.add(row.method, datasets[d], "published", "test_rmse", row.rmse[d], Provenance::published);
    return report;
}

std::string config_digest(const nlohmann::json& config) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : config.dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

static constexpr std::string_view kHeader = "method,dataset,config_digest,metric,value,provenance";

std::string metrics_csv(const MetricsReport& report) {
    std::string out(kHeader);
    out += '\n';
    for (const auto& r : report.rows) {
        out += csv_field(r.method) + ',' + csv_field(r.dataset) + ',' + csv_field(r.config_digest) + ',' +
               csv_field(r.metric) + ',' + format_double(r.value) + ',' + std::string(provenance_name(r.provenance)) +
               '\n';
    }
    return out;
}

namespace {

std::filesystem::path mirror_path(const std::filesystem::path& path) {
    auto p = path;
    return p.replace_extension(".json");
}

nlohmann::json rows_json(const MetricsReport& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : report.rows)
        rows.push_back({{"method", r.method},
                        {"dataset", r.dataset},
                        {"config_digest", r.config_digest},
                        {"metric", r.metric},
                        {"value", r.value},
                        {"provenance", std::string(provenance_name(r.provenance))}});
    return rows;
}

// RFC 4180 records; quoted fields may contain separators, doubled quotes and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    for (std::size_t k = 0; k < text.size(); ++k) {
        const char c = text[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < text.size() && text[k + 1] == '"') {
                    field += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
            field_started = true;
        } else if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            field_started = true;
        } else if (c == '\n' || c == '\r') {
            if (c == '\r' && k + 1 < text.size() && text[k + 1] == '\n') ++k;
            if (field_started || !field.empty() || !record.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            field.clear();
            record.clear();
            field_started = false;
        } else {
            field += c;
            field_started = true;
        }
    }
    if (quoted) throw DataError("unterminated quoted CSV field");
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace

void write_metrics(const MetricsReport& report, const std::filesystem::path& path) {
    if (report.rows.empty()) throw ConfigError("refusing to write an empty metrics report");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text(path, metrics_csv(report));
    nlohmann::json mirror{{"rows", rows_json(report)}, {"metadata", report.metadata}};
    write_text(mirror_path(path), mirror.dump(2) + "\n");
}

MetricsReport read_metrics(const std::filesystem::path& path) {
    const auto records = parse_csv(read_text(path));
    if (records.empty()) throw DataError(path.string() + " is empty");
    std::string header;
    for (std::size_t c = 0; c < records[0].size(); ++c) header += (c ? "," : "") + records[0][c];
    if (header != kHeader) throw DataError(path.string() + ": unexpected header '" + header + "'");

    MetricsReport report;
    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& f = records[r];
        if (f.size() != 6) throw DataError(path.string() + ": record " + std::to_string(r) + " has " +
                                           std::to_string(f.size()) + " fields");
        double value = 0.0;
        try {
            value = std::stod(f[4]);
        } catch (const std::exception&) {
            throw DataError(path.string() + ": bad value '" + f[4] + "'");
        }
        report.add(f[0], f[1], f[2], f[3], value, parse_provenance(f[5]));
    }
    const auto mirror = mirror_path(path);
    if (std::filesystem::exists(mirror)) {
        const auto j = nlohmann::json::parse(read_text(mirror));
        report.metadata = j.value("metadata", nlohmann::json::object());
    }
    return report;
}

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape_xml(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string tick_label(double v) {
    char buf[32];
    if (std::fabs(v) >= 1000.0 || v == std::floor(v))
        std::snprintf(buf, sizeof buf, "%.0f", v);
    else
        std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

std::string wcss_svg(const std::vector<Curve>& series) {
    if (series.empty()) throw ConfigError("nothing to plot");
    double x_lo = std::numeric_limits<double>::infinity();
    double x_hi = -x_lo;
    double y_lo = x_lo;
    double y_hi = -x_lo;
    for (const auto& curve : series) {
        if (curve.points.size() < 2) throw ConfigError("curve '" + curve.label + "' needs at least two points");
        for (const auto& [x, y] : curve.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) throw ConfigError("non-finite point in '" + curve.label + "'");
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    }
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    const double pad = y_hi > y_lo ? 0.05 * (y_hi - y_lo) : std::max(1.0, std::fabs(y_hi) * 0.05);
    y_lo -= pad;
    y_hi += pad;

    constexpr double width = 720.0;
    constexpr double height = 440.0;
    constexpr double left = 80.0;
    constexpr double right = 190.0;
    constexpr double top = 30.0;
    constexpr double bottom = 60.0;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    const auto sx = [&](double x) { return left + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    const auto sy = [&](double y) { return top + (y_hi - y) / (y_hi - y_lo) * plot_h; };

    static constexpr std::array<const char*, 8> palette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                        "#9467bd", "#8c564b", "#e377c2", "#17becf"};

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(width) << "\" height=\""
        << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n"
        << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width) << "\" height=\"" << fmt(height) << "\" fill=\"white\"/>\n"
        << "<g id=\"axes\" stroke=\"black\" stroke-width=\"1\">\n"
        << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\"" << fmt(left + plot_w)
        << "\" y2=\"" << fmt(top + plot_h) << "\"/>\n"
        << "<line x1=\"" << fmt(left) << "\" y1=\"" << fmt(top) << "\" x2=\"" << fmt(left) << "\" y2=\""
        << fmt(top + plot_h) << "\"/>\n"
        << "</g>\n";

    svg << "<g id=\"ticks\" font-family=\"sans-serif\" font-size=\"11\">\n";
    constexpr int y_ticks = 5;
    for (int t = 0; t <= y_ticks; ++t) {
        const double v = y_lo + (y_hi - y_lo) * t / y_ticks;
        svg << "<line x1=\"" << fmt(left - 4) << "\" y1=\"" << fmt(sy(v)) << "\" x2=\"" << fmt(left) << "\" y2=\""
            << fmt(sy(v)) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(left - 8) << "\" y=\"" << fmt(sy(v) + 4) << "\" text-anchor=\"end\">"
            << tick_label(v) << "</text>\n";
    }
    std::vector<double> xs;
    for (const auto& curve : series)
        for (const auto& p : curve.points) xs.push_back(p.first);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (double v : xs) {
        svg << "<line x1=\"" << fmt(sx(v)) << "\" y1=\"" << fmt(top + plot_h) << "\" x2=\"" << fmt(sx(v))
            << "\" y2=\"" << fmt(top + plot_h + 4) << "\" stroke=\"black\"/>\n"
            << "<text x=\"" << fmt(sx(v)) << "\" y=\"" << fmt(top + plot_h + 18) << "\" text-anchor=\"middle\">"
            << tick_label(v) << "</text>\n";
    }
    svg << "</g>\n"
        << "<text x=\"" << fmt(left + plot_w / 2) << "\" y=\"" << fmt(height - 15)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">Number of clusters</text>\n"
        << "<text x=\"20\" y=\"" << fmt(top + plot_h / 2) << "\" transform=\"rotate(-90 20 " << fmt(top + plot_h / 2)
        << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">WCSS</text>\n";

    svg << "<g id=\"series\" fill=\"none\" stroke-width=\"2\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        auto pts = series[s].points;
        std::sort(pts.begin(), pts.end());
        svg << "<polyline data-label=\"" << escape_xml(series[s].label) << "\" stroke=\""
            << palette[s % palette.size()] << "\" points=\"";
        for (std::size_t p = 0; p < pts.size(); ++p)
            svg << (p ? " " : "") << fmt(sx(pts[p].first)) << ',' << fmt(sy(pts[p].second));
        svg << "\"/>\n";
    }
    svg << "</g>\n";

    svg << "<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    for (std::size_t s = 0; s < series.size(); ++s) {
        const double y = top + 10 + 20.0 * static_cast<double>(s);
        const double x = left + plot_w + 20;
        svg << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(x + 24) << "\" y2=\"" << fmt(y)
            << "\" stroke=\"" << palette[s % palette.size()] << "\" stroke-width=\"2\"/>\n"
            << "<text x=\"" << fmt(x + 30) << "\" y=\"" << fmt(y + 4) << "\">" << escape_xml(series[s].label)
            << "</text>\n";
    }
    svg << "</g>\n</svg>\n";
    return svg.str();
}

void plot_wcss(const std::vector<Curve>& series, const std::filesystem::path& path) {
    const auto svg = wcss_svg(series);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    write_text(path, svg);
}

}  // namespace nsnmf
