#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace nsnmf {

enum class Provenance { computed, published };

std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view tag);

struct MetricRow {
    std::string method;
    std::string dataset;
    std::string config_digest;
    std::string metric;
    double value = 0.0;
    Provenance provenance = Provenance::computed;

    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

struct MetricsReport {
    std::vector<MetricRow> rows;
    nlohmann::json metadata = nlohmann::json::object();  // seed, timestamps, manifest hashes

    void add(std::string method, std::string dataset, std::string config_digest, std::string metric, double value,
             Provenance provenance = Provenance::computed);

    /// Rows with the given provenance only; aggregates must never mix the two kinds.
    std::vector<MetricRow> select(Provenance provenance) const;

    /// Published test RMSE values for every method and dataset, tagged published.
    static MetricsReport published_reference();

    friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// 16 hex digits of FNV-1a 64 over the compact JSON dump.
std::string config_digest(const nlohmann::json& config);

/// CSV header + rows in insertion order.
std::string metrics_csv(const MetricsReport& report);

/// Writes `path` (CSV) and the JSON mirror next to it (same stem, .json).
void write_metrics(const MetricsReport& report, const std::filesystem::path& path);

/// Reads the CSV written by write_metrics() plus the metadata of its JSON mirror.
MetricsReport read_metrics(const std::filesystem::path& path);

struct Curve {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (number of clusters, WCSS)
};

/// Standalone SVG 1.1 line chart; output bytes depend only on the input.
std::string wcss_svg(const std::vector<Curve>& series);
void plot_wcss(const std::vector<Curve>& series, const std::filesystem::path& path);

}  // namespace nsnmf
