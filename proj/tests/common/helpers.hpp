#pragma once

#include <initializer_list>
#include <memory>
#include <string>
#include <tuple>

#include "nsnmf/data.hpp"
#include "nsnmf/random.hpp"

namespace testutil {

/// Dataset from (user, item, rating) with external ids "u<n>" / "i<n>" interned in order.
inline nsnmf::RatingDataset make_dataset(std::initializer_list<std::tuple<int, int, double>> rows,
                                         double lo = 1.0, double hi = 5.0) {
    auto ids = std::make_shared<nsnmf::IdMaps>();
    nsnmf::RatingDataset ds;
    for (const auto& [u, i, r] : rows)
        ds.triples.push_back({ids->intern_user("u" + std::to_string(u)), ids->intern_item("i" + std::to_string(i)), r});
    ds.n_users = ids->user_ids.size();
    ds.n_items = ids->item_ids.size();
    ds.scale_min = lo;
    ds.scale_max = hi;
    ds.ids = std::move(ids);
    return ds;
}

/// Random dataset where every (user, item) cell is observed with probability `density`.
inline nsnmf::RatingDataset random_dataset(std::size_t users, std::size_t items, double density, std::uint64_t seed) {
    nsnmf::Rng rng(seed);
    auto ids = std::make_shared<nsnmf::IdMaps>();
    nsnmf::RatingDataset ds;
    for (std::size_t u = 0; u < users; ++u)
        for (std::size_t i = 0; i < items; ++i)
            if (rng.uniform() < density)
                ds.triples.push_back({ids->intern_user("u" + std::to_string(u)),
                                      ids->intern_item("i" + std::to_string(i)),
                                      static_cast<double>(1 + rng.below(5))});
    ds.n_users = ids->user_ids.size();
    ds.n_items = ids->item_ids.size();
    ds.scale_min = 1.0;
    ds.scale_max = 5.0;
    ds.ids = std::move(ids);
    return ds;
}

}  // namespace testutil
