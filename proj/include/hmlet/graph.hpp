#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "hmlet/csr.hpp"

namespace hmlet {

// Malformed or empty input data.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deduplicated (user, item) interaction pairs with original string ids.
struct RawInteractions {
    std::vector<std::pair<std::string, std::string>> pairs;
};

enum class EdgeListFormat {
    Auto,    // accept both layouts below
    Pairs,   // one "user item" per line
    Grouped, // one "user item item ..." per line
};

// Parses whitespace-separated edge-list text. Grouped lines are detected by
// token count. Lines with fewer than two tokens raise DataError with the
// line number; an input with no pairs raises DataError.
RawInteractions load_interactions(std::istream& source,
                                  EdgeListFormat format = EdgeListFormat::Auto);
RawInteractions load_interactions_file(const std::string& path,
                                       EdgeListFormat format = EdgeListFormat::Auto);

// Iteratively removes users and items with degree < k until every survivor
// has degree >= k. Raises DataError if nothing survives.
RawInteractions kcore_filter(const RawInteractions& raw, std::size_t k);

// Bipartite interaction graph with dense indices and a per-user
// train/val/test partition. Users and items are indexed by sorted original
// id, so the numbering depends only on the pair set.
struct InteractionGraph {
    std::size_t num_users = 0;
    std::size_t num_items = 0;
    std::vector<std::string> user_ids; // dense index -> original id
    std::vector<std::string> item_ids;
    std::vector<std::vector<std::int32_t>> train; // per user, sorted item indices
    std::vector<std::vector<std::int32_t>> val;
    std::vector<std::vector<std::int32_t>> test;
    std::vector<std::int64_t> user_degree; // training degrees
    std::vector<std::int64_t> item_degree;

    std::size_t num_nodes() const { return num_users + num_items; }
    std::size_t num_train_pairs() const;
};

struct SplitRatios {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
};

// Per-user random partition of each user's items. Train takes
// ceil(train_ratio * degree), val takes ceil(val_ratio * degree) of what is
// left, test the rest; a user is never left without a train item.
InteractionGraph split(const RawInteractions& raw, const SplitRatios& ratios,
                       std::uint64_t seed);

// Symmetrically normalized adjacency over users+items. Entry (u, U+v) =
// (U+v, u) = 1/sqrt(|N_u|*|N_v|) for every training pair; degrees come from
// the training set only.
Csr build_adjacency(const InteractionGraph& graph);

// Split files are grouped-per-user text with original ids; id maps are
// "original-id TAB dense-index" lines.
void write_prepared(const InteractionGraph& graph, const std::string& out_dir);
InteractionGraph read_prepared(const std::string& dir);

} // namespace hmlet
