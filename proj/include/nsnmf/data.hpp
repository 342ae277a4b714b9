#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace nsnmf {

using Index = std::uint32_t;

struct RatingTriple {
    Index user = 0;
    Index item = 0;
    double rating = 0.0;

    friend bool operator==(const RatingTriple&, const RatingTriple&) = default;
};

/// External ID <-> dense index dictionaries. Shared between a dataset and every view cut from it.
struct IdMaps {
    std::vector<std::string> user_ids;
    std::vector<std::string> item_ids;
    std::unordered_map<std::string, Index> user_index;
    std::unordered_map<std::string, Index> item_index;

    Index intern_user(const std::string& id);
    Index intern_item(const std::string& id);
    std::optional<Index> find_user(const std::string& id) const;
    std::optional<Index> find_item(const std::string& id) const;
};

/**
 * Sparse store of observed ratings.
 *
 * A dataset owns the index space (n_users, n_items, ids); views produced by
 * split() and make_folds() share that space with the source so that models
 * trained on one view can be evaluated on another.
 */
struct RatingDataset {
    std::vector<RatingTriple> triples;
    std::size_t n_users = 0;
    std::size_t n_items = 0;
    double scale_min = 0.0;
    double scale_max = 0.0;
    std::shared_ptr<const IdMaps> ids;

    std::size_t size() const { return triples.size(); }
    bool empty() const { return triples.empty(); }
    double mean_rating() const;

    /// Same index space and scale, different triples.
    RatingDataset view(std::vector<RatingTriple> subset) const;

    /// Counts of ratings per user / per item.
    std::vector<std::size_t> user_counts() const;
    std::vector<std::size_t> item_counts() const;

    /// FNV-1a 64 over "user\titem\trating\n" lines (external ids, shortest round-trip rating).
    std::string content_hash() const;
};

enum class RatingFormat { automatic, csv, tsv, double_colon, whitespace };

RatingFormat parse_format(std::string_view tag);
std::string_view format_name(RatingFormat format);

struct LoadOptions {
    RatingFormat format = RatingFormat::automatic;
    std::optional<double> scale_min;
    std::optional<double> scale_max;
};

/// Parses delimiter-separated (user, item, rating[, timestamp]) records. A first line whose
/// rating field is not numeric is treated as a header.
RatingDataset parse_ratings(std::string_view text, const LoadOptions& options = {});

/// Reads a rating file (optionally gzip-compressed) and parses it with parse_ratings().
RatingDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options = {});

/// Writes "user,item,rating" CSV with a header, external ids, in triple order.
void write_ratings(const std::filesystem::path& path, const RatingDataset& ds);

/// Alternating user/item activity filter iterated to a fixed point. Indices are reassigned
/// in first-appearance order of the surviving triples.
RatingDataset filter_activity(const RatingDataset& ds, std::size_t min_user_ratings,
                              std::size_t min_item_ratings);

struct SplitPlan {
    RatingDataset train;
    RatingDataset test;
    std::uint64_t seed = 0;
    double train_fraction = 0.0;
};

/// Seeded shuffle, then the first floor(fraction * N) triples go to train.
SplitPlan split(const RatingDataset& ds, double train_fraction, std::uint64_t seed);

struct CvPlan {
    std::vector<std::pair<RatingDataset, RatingDataset>> folds;  // (train, validation)
    std::size_t n_folds = 0;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then contiguous chunking; the first N mod n_folds blocks get one extra triple.
CvPlan make_folds(const RatingDataset& train, std::size_t n_folds, std::uint64_t seed);

/// Provenance record written next to every prepared split.
struct DatasetManifest {
    std::string source;
    std::string format;
    std::size_t raw_ratings = 0;
    std::size_t raw_users = 0;
    std::size_t raw_items = 0;
    std::size_t min_user_ratings = 0;
    std::size_t min_item_ratings = 0;
    std::size_t ratings = 0;
    std::size_t users = 0;
    std::size_t items = 0;
    double scale_min = 0.0;
    double scale_max = 0.0;
    std::string content_hash;
    std::uint64_t split_seed = 0;
    double train_fraction = 0.0;
    std::size_t train_size = 0;
    std::size_t test_size = 0;
};

void to_json(nlohmann::json& j, const DatasetManifest& m);
void from_json(const nlohmann::json& j, DatasetManifest& m);

struct PreparedData {
    RatingDataset full;
    SplitPlan split;
    DatasetManifest manifest;
};

/// Load → filter → split, filling in the manifest.
PreparedData prepare(const std::filesystem::path& raw, const LoadOptions& options,
                     std::size_t min_user_ratings, std::size_t min_item_ratings,
                     double train_fraction, std::uint64_t seed);

/// Writes ratings.csv (filtered data, original order), train.csv, test.csv and manifest.json.
void write_prepared(const std::filesystem::path& dir, const PreparedData& prepared);

/// Inverse of write_prepared(); train/test share the index space of ratings.csv.
PreparedData read_prepared(const std::filesystem::path& dir);

}  // namespace nsnmf
