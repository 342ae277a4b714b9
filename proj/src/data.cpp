#include "nsnmf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <zlib.h>

#include "nsnmf/errors.hpp"
#include "nsnmf/format.hpp"
#include "nsnmf/random.hpp"

namespace nsnmf {

Index IdMaps::intern_user(const std::string& id) {
    auto [it, inserted] = user_index.try_emplace(id, static_cast<Index>(user_ids.size()));
    if (inserted) user_ids.push_back(id);
    return it->second;
}

Index IdMaps::intern_item(const std::string& id) {
    auto [it, inserted] = item_index.try_emplace(id, static_cast<Index>(item_ids.size()));
    if (inserted) item_ids.push_back(id);
    return it->second;
}

std::optional<Index> IdMaps::find_user(const std::string& id) const {
    auto it = user_index.find(id);
    if (it == user_index.end()) return std::nullopt;
    return it->second;
}

std::optional<Index> IdMaps::find_item(const std::string& id) const {
    auto it = item_index.find(id);
    if (it == item_index.end()) return std::nullopt;
    return it->second;
}

double RatingDataset::mean_rating() const {
    if (triples.empty()) throw EmptyDatasetError("mean of an empty dataset");
    double sum = 0.0;
    for (const auto& t : triples) sum += t.rating;
    return sum / static_cast<double>(triples.size());
}

RatingDataset RatingDataset::view(std::vector<RatingTriple> subset) const {
    RatingDataset out;
    out.triples = std::move(subset);
    out.n_users = n_users;
    out.n_items = n_items;
    out.scale_min = scale_min;
    out.scale_max = scale_max;
    out.ids = ids;
    return out;
}

std::vector<std::size_t> RatingDataset::user_counts() const {
    std::vector<std::size_t> counts(n_users, 0);
    for (const auto& t : triples) ++counts[t.user];
    return counts;
}

std::vector<std::size_t> RatingDataset::item_counts() const {
    std::vector<std::size_t> counts(n_items, 0);
    for (const auto& t : triples) ++counts[t.item];
    return counts;
}

std::string RatingDataset::content_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& t : triples) {
        feed(ids ? ids->user_ids[t.user] : std::to_string(t.user));
        feed("\t");
        feed(ids ? ids->item_ids[t.item] : std::to_string(t.item));
        feed("\t");
        feed(format_double(t.rating));
        feed("\n");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

RatingFormat parse_format(std::string_view tag) {
    if (tag == "auto") return RatingFormat::automatic;
    if (tag == "csv") return RatingFormat::csv;
    if (tag == "tsv") return RatingFormat::tsv;
    if (tag == "dcolon" || tag == "::") return RatingFormat::double_colon;
    if (tag == "ws" || tag == "whitespace") return RatingFormat::whitespace;
    throw ConfigError("unknown rating format '" + std::string(tag) + "' (auto|csv|tsv|dcolon|ws)");
}

std::string_view format_name(RatingFormat format) {
    switch (format) {
        case RatingFormat::automatic: return "auto";
        case RatingFormat::csv: return "csv";
        case RatingFormat::tsv: return "tsv";
        case RatingFormat::double_colon: return "dcolon";
        case RatingFormat::whitespace: return "ws";
    }
    return "auto";
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
    return s;
}

RatingFormat detect_format(std::string_view line) {
    if (line.find("::") != std::string_view::npos) return RatingFormat::double_colon;
    if (line.find('\t') != std::string_view::npos) return RatingFormat::tsv;
    if (line.find(',') == std::string_view::npos && line.find(' ') != std::string_view::npos)
        return RatingFormat::whitespace;
    return RatingFormat::csv;
}

std::vector<std::string_view> split_fields(std::string_view line, RatingFormat format) {
    if (format == RatingFormat::whitespace) {
        std::vector<std::string_view> fields;
        std::size_t pos = 0;
        while (pos < line.size()) {
            pos = line.find_first_not_of(" \t\r", pos);
            if (pos == std::string_view::npos) break;
            const auto end = std::min(line.find_first_of(" \t\r", pos), line.size());
            fields.push_back(line.substr(pos, end - pos));
            pos = end;
        }
        return fields;
    }
    const std::string_view delim = format == RatingFormat::double_colon ? "::"
                                   : format == RatingFormat::tsv        ? "\t"
                                                                        : ",";
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        if (pos == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + delim.size();
    }
    return fields;
}

std::optional<double> parse_number(std::string_view s) {
    double value = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
    return value;
}

std::string read_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const bool gzipped = bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
                         static_cast<unsigned char>(bytes[1]) == 0x8b;
    if (!gzipped) return bytes;

    gzFile gz = gzopen(path.c_str(), "rb");
    if (gz == nullptr) throw IoError("cannot open gzip stream " + path.string());
    std::string text;
    char buf[1 << 16];
    int n = 0;
    while ((n = gzread(gz, buf, sizeof buf)) > 0) text.append(buf, static_cast<std::size_t>(n));
    const bool failed = n < 0;
    gzclose(gz);
    if (failed) throw IoError("corrupt gzip stream " + path.string());
    return text;
}

}  // namespace

RatingDataset parse_ratings(std::string_view text, const LoadOptions& options) {
    auto ids = std::make_shared<IdMaps>();
    RatingDataset ds;
    RatingFormat format = options.format;
    std::set<std::pair<Index, Index>> seen;

    std::size_t line_no = 0;
    std::size_t start = 0;
    bool first_record = true;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = trim(text.substr(start, end - start));
        start = end + 1;
        ++line_no;
        if (line.empty() || line.front() == '#') {
            if (end == text.size()) break;
            continue;
        }
        if (format == RatingFormat::automatic) format = detect_format(line);

        const auto fields = split_fields(line, format);
        if (fields.size() < 3 || fields.size() > 4)
            throw ParseError(line_no, "expected 3 or 4 fields, got " + std::to_string(fields.size()));
        const auto rating = parse_number(fields[2]);
        if (!rating) {
            if (first_record) {  // header
                first_record = false;
                continue;
            }
            throw ParseError(line_no, "rating '" + std::string(fields[2]) + "' is not a number");
        }
        first_record = false;
        if (!std::isfinite(*rating)) throw ParseError(line_no, "rating is not finite");
        if (fields[0].empty() || fields[1].empty()) throw ParseError(line_no, "empty user or item id");

        const Index u = ids->intern_user(std::string(fields[0]));
        const Index i = ids->intern_item(std::string(fields[1]));
        if (!seen.emplace(u, i).second)
            throw DuplicateRatingError("line " + std::to_string(line_no) + ": duplicate rating for user '" +
                                       std::string(fields[0]) + "', item '" + std::string(fields[1]) + "'");
        ds.triples.push_back({u, i, *rating});
        if (end == text.size()) break;
    }
    if (ds.triples.empty()) throw EmptyDatasetError("no ratings found");

    ds.n_users = ids->user_ids.size();
    ds.n_items = ids->item_ids.size();
    const auto [lo, hi] = std::minmax_element(ds.triples.begin(), ds.triples.end(),
                                              [](const auto& a, const auto& b) { return a.rating < b.rating; });
    ds.scale_min = options.scale_min.value_or(lo->rating);
    ds.scale_max = options.scale_max.value_or(hi->rating);
    if (ds.scale_min > ds.scale_max) throw ConfigError("scale_min exceeds scale_max");
    for (const auto& t : ds.triples) {
        if (t.rating < ds.scale_min || t.rating > ds.scale_max)
            throw DataError("rating " + format_double(t.rating) + " outside the configured scale");
    }
    ds.ids = std::move(ids);
    return ds;
}

RatingDataset load_ratings(const std::filesystem::path& path, const LoadOptions& options) {
    const auto text = read_file(path);
    try {
        return parse_ratings(text, options);
    } catch (const EmptyDatasetError&) {
        throw EmptyDatasetError("no ratings found in " + path.string());
    }
}

void write_ratings(const std::filesystem::path& path, const RatingDataset& ds) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << "user,item,rating\n";
    for (const auto& t : ds.triples) {
        out << csv_field(ds.ids->user_ids[t.user]) << ',' << csv_field(ds.ids->item_ids[t.item]) << ','
            << format_double(t.rating) << '\n';
    }
    if (!out) throw IoError("write failed for " + path.string());
}

RatingDataset filter_activity(const RatingDataset& ds, std::size_t min_user_ratings,
                              std::size_t min_item_ratings) {
    std::vector<char> keep(ds.triples.size(), 1);
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<std::size_t> per_user(ds.n_users, 0);
        for (std::size_t t = 0; t < ds.triples.size(); ++t)
            if (keep[t]) ++per_user[ds.triples[t].user];
        for (std::size_t t = 0; t < ds.triples.size(); ++t) {
            if (keep[t] && per_user[ds.triples[t].user] < min_user_ratings) {
                keep[t] = 0;
                changed = true;
            }
        }
        std::vector<std::size_t> per_item(ds.n_items, 0);
        for (std::size_t t = 0; t < ds.triples.size(); ++t)
            if (keep[t]) ++per_item[ds.triples[t].item];
        for (std::size_t t = 0; t < ds.triples.size(); ++t) {
            if (keep[t] && per_item[ds.triples[t].item] < min_item_ratings) {
                keep[t] = 0;
                changed = true;
            }
        }
    }

    auto ids = std::make_shared<IdMaps>();
    RatingDataset out;
    for (std::size_t t = 0; t < ds.triples.size(); ++t) {
        if (!keep[t]) continue;
        const auto& src = ds.triples[t];
        out.triples.push_back({ids->intern_user(ds.ids->user_ids[src.user]),
                               ids->intern_item(ds.ids->item_ids[src.item]), src.rating});
    }
    if (out.triples.empty()) throw EmptyDatasetError("activity filter removed every rating");
    out.n_users = ids->user_ids.size();
    out.n_items = ids->item_ids.size();
    out.scale_min = ds.scale_min;
    out.scale_max = ds.scale_max;
    out.ids = std::move(ids);
    return out;
}

namespace {

std::vector<std::size_t> shuffled_positions(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

}  // namespace

SplitPlan split(const RatingDataset& ds, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("train fraction must lie in (0, 1), got " + format_double(train_fraction));
    const auto order = shuffled_positions(ds.size(), seed);
    const auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(ds.size())));

    std::vector<RatingTriple> train;
    std::vector<RatingTriple> test;
    train.reserve(n_train);
    test.reserve(ds.size() - n_train);
    for (std::size_t k = 0; k < order.size(); ++k)
        (k < n_train ? train : test).push_back(ds.triples[order[k]]);
    return {ds.view(std::move(train)), ds.view(std::move(test)), seed, train_fraction};
}

CvPlan make_folds(const RatingDataset& train, std::size_t n_folds, std::uint64_t seed) {
    if (n_folds < 2) throw ConfigError("need at least 2 folds");
    if (train.size() < n_folds)
        throw ConfigError("cannot cut " + std::to_string(train.size()) + " ratings into " +
                          std::to_string(n_folds) + " folds");
    const auto order = shuffled_positions(train.size(), seed);
    const std::size_t base = train.size() / n_folds;
    const std::size_t extra = train.size() % n_folds;

    CvPlan plan;
    plan.n_folds = n_folds;
    plan.seed = seed;
    std::size_t begin = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
        const std::size_t end = begin + base + (f < extra ? 1 : 0);
        std::vector<RatingTriple> fit;
        std::vector<RatingTriple> validation;
        fit.reserve(train.size() - (end - begin));
        validation.reserve(end - begin);
        for (std::size_t k = 0; k < order.size(); ++k)
            (k >= begin && k < end ? validation : fit).push_back(train.triples[order[k]]);
        plan.folds.emplace_back(train.view(std::move(fit)), train.view(std::move(validation)));
        begin = end;
    }
    return plan;
}

void to_json(nlohmann::json& j, const DatasetManifest& m) {
    j = nlohmann::json{{"source", m.source},
                       {"format", m.format},
                       {"raw", {{"ratings", m.raw_ratings}, {"users", m.raw_users}, {"items", m.raw_items}}},
                       {"filter", {{"min_user_ratings", m.min_user_ratings}, {"min_item_ratings", m.min_item_ratings}}},
                       {"filtered", {{"ratings", m.ratings}, {"users", m.users}, {"items", m.items}}},
                       {"scale", {m.scale_min, m.scale_max}},
                       {"content_hash", m.content_hash},
                       {"split",
                        {{"seed", m.split_seed},
                         {"train_fraction", m.train_fraction},
                         {"train", m.train_size},
                         {"test", m.test_size}}}};
}

void from_json(const nlohmann::json& j, DatasetManifest& m) {
    m.source = j.at("source").get<std::string>();
    m.format = j.at("format").get<std::string>();
    m.raw_ratings = j.at("raw").at("ratings");
    m.raw_users = j.at("raw").at("users");
    m.raw_items = j.at("raw").at("items");
    m.min_user_ratings = j.at("filter").at("min_user_ratings");
    m.min_item_ratings = j.at("filter").at("min_item_ratings");
    m.ratings = j.at("filtered").at("ratings");
    m.users = j.at("filtered").at("users");
    m.items = j.at("filtered").at("items");
    m.scale_min = j.at("scale").at(0);
    m.scale_max = j.at("scale").at(1);
    m.content_hash = j.at("content_hash").get<std::string>();
    m.split_seed = j.at("split").at("seed");
    m.train_fraction = j.at("split").at("train_fraction");
    m.train_size = j.at("split").at("train");
    m.test_size = j.at("split").at("test");
}

PreparedData prepare(const std::filesystem::path& raw, const LoadOptions& options,
                     std::size_t min_user_ratings, std::size_t min_item_ratings,
                     double train_fraction, std::uint64_t seed) {
    const auto loaded = load_ratings(raw, options);
    PreparedData out;
    out.full = filter_activity(loaded, min_user_ratings, min_item_ratings);
    out.split = split(out.full, train_fraction, seed);

    auto& m = out.manifest;
    m.source = raw.filename().string();
    m.format = std::string(format_name(options.format));
    m.raw_ratings = loaded.size();
    m.raw_users = loaded.n_users;
    m.raw_items = loaded.n_items;
    m.min_user_ratings = min_user_ratings;
    m.min_item_ratings = min_item_ratings;
    m.ratings = out.full.size();
    m.users = out.full.n_users;
    m.items = out.full.n_items;
    m.scale_min = out.full.scale_min;
    m.scale_max = out.full.scale_max;
    m.content_hash = out.full.content_hash();
    m.split_seed = seed;
    m.train_fraction = train_fraction;
    m.train_size = out.split.train.size();
    m.test_size = out.split.test.size();
    return out;
}

void write_prepared(const std::filesystem::path& dir, const PreparedData& prepared) {
    std::filesystem::create_directories(dir);
    write_ratings(dir / "ratings.csv", prepared.full);
    write_ratings(dir / "train.csv", prepared.split.train);
    write_ratings(dir / "test.csv", prepared.split.test);
    write_text(dir / "manifest.json", nlohmann::json(prepared.manifest).dump(2) + "\n");
}

namespace {

RatingDataset remap(const RatingDataset& part, const RatingDataset& full, const std::string& name) {
    std::vector<RatingTriple> triples;
    triples.reserve(part.size());
    for (const auto& t : part.triples) {
        const auto u = full.ids->find_user(part.ids->user_ids[t.user]);
        const auto i = full.ids->find_item(part.ids->item_ids[t.item]);
        if (!u || !i) throw DataError(name + " references an id missing from ratings.csv");
        triples.push_back({*u, *i, t.rating});
    }
    return full.view(std::move(triples));
}

}  // namespace

PreparedData read_prepared(const std::filesystem::path& dir) {
    PreparedData out;
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw IoError("no prepared split in " + dir.string() + " (missing manifest.json)");
    try {
        out.manifest = nlohmann::json::parse(read_text(manifest_path)).get<DatasetManifest>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad manifest " + manifest_path.string() + ": " + e.what());
    }
    LoadOptions options;
    options.format = RatingFormat::csv;
    options.scale_min = out.manifest.scale_min;
    options.scale_max = out.manifest.scale_max;
    out.full = load_ratings(dir / "ratings.csv", options);
    out.split.seed = out.manifest.split_seed;
    out.split.train_fraction = out.manifest.train_fraction;
    out.split.train = remap(load_ratings(dir / "train.csv", options), out.full, "train.csv");
    out.split.test = remap(load_ratings(dir / "test.csv", options), out.full, "test.csv");
    return out;
}

}  // namespace nsnmf
