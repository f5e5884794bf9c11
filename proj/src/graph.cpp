#include "hmlet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "hmlet/rng.hpp"

namespace hmlet {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::istringstream iss(line);
    std::string t;
    while (iss >> t) toks.push_back(std::move(t));
    return toks;
}

} // namespace

std::size_t InteractionGraph::num_train_pairs() const {
    std::size_t n = 0;
    for (const auto& t : train) n += t.size();
    return n;
}

RawInteractions load_interactions(std::istream& source, EdgeListFormat format) {
    std::set<std::pair<std::string, std::string>> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        auto toks = tokenize(line);
        if (toks.empty()) continue; // blank line
        if (toks.size() < 2) {
            throw DataError("parse error at line " + std::to_string(line_no) +
                            ": expected at least 2 tokens, got " + std::to_string(toks.size()));
        }
        if (format == EdgeListFormat::Pairs && toks.size() != 2) {
            throw DataError("parse error at line " + std::to_string(line_no) +
                            ": pair format expects exactly 2 tokens, got " +
                            std::to_string(toks.size()));
        }
        for (std::size_t i = 1; i < toks.size(); ++i) {
            seen.emplace(toks[0], toks[i]);
        }
    }
    if (seen.empty()) throw DataError("empty dataset: no interactions found");
    RawInteractions raw;
    raw.pairs.assign(seen.begin(), seen.end());
    return raw;
}

RawInteractions load_interactions_file(const std::string& path, EdgeListFormat format) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return load_interactions(in, format);
}

RawInteractions kcore_filter(const RawInteractions& raw, std::size_t k) {
    if (k < 1) throw std::invalid_argument("kcore_filter: k must be >= 1");
    std::unordered_map<std::string, std::size_t> udeg, ideg;
    for (const auto& [u, v] : raw.pairs) {
        ++udeg[u];
        ++ideg[v];
    }
    std::vector<char> alive(raw.pairs.size(), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t p = 0; p < raw.pairs.size(); ++p) {
            if (!alive[p]) continue;
            const auto& [u, v] = raw.pairs[p];
            if (udeg[u] < k || ideg[v] < k) {
                alive[p] = 0;
                --udeg[u];
                --ideg[v];
                changed = true;
            }
        }
    }
    RawInteractions out;
    for (std::size_t p = 0; p < raw.pairs.size(); ++p) {
        if (alive[p]) out.pairs.push_back(raw.pairs[p]);
    }
    if (out.pairs.empty()) {
        throw DataError("empty dataset: no interactions survive the " + std::to_string(k) +
                        "-core filter");
    }
    return out;
}

InteractionGraph split(const RawInteractions& raw, const SplitRatios& ratios,
                       std::uint64_t seed) {
    InteractionGraph g;
    {
        std::set<std::string> users, items;
        for (const auto& [u, v] : raw.pairs) {
            users.insert(u);
            items.insert(v);
        }
        g.user_ids.assign(users.begin(), users.end());
        g.item_ids.assign(items.begin(), items.end());
    }
    g.num_users = g.user_ids.size();
    g.num_items = g.item_ids.size();

    std::unordered_map<std::string, std::int32_t> uidx, iidx;
    for (std::size_t i = 0; i < g.user_ids.size(); ++i) uidx[g.user_ids[i]] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < g.item_ids.size(); ++i) iidx[g.item_ids[i]] = static_cast<std::int32_t>(i);

    std::vector<std::vector<std::int32_t>> items_of(g.num_users);
    for (const auto& [u, v] : raw.pairs) {
        items_of[uidx[u]].push_back(iidx[v]);
    }

    g.train.resize(g.num_users);
    g.val.resize(g.num_users);
    g.test.resize(g.num_users);

    const std::uint64_t split_seed = derive_stream(seed, "split");
    for (std::size_t u = 0; u < g.num_users; ++u) {
        auto& items = items_of[u];
        std::sort(items.begin(), items.end());
        // Fisher-Yates with a per-user stream so the outcome is independent
        // of user iteration order.
        Rng rng(derive_stream(split_seed, "user", u, 0, 0));
        for (std::size_t i = items.size(); i > 1; --i) {
            const std::size_t j = rng.next_below(i);
            std::swap(items[i - 1], items[j]);
        }
        const std::size_t d = items.size();
        std::size_t n_train = static_cast<std::size_t>(std::ceil(ratios.train * static_cast<double>(d)));
        n_train = std::min(n_train, d);
        std::size_t n_val = static_cast<std::size_t>(std::ceil(ratios.val * static_cast<double>(d)));
        n_val = std::min(n_val, d - n_train);
        if (n_train == 0) {
            // Keep at least one train item, taken from test first, then val.
            n_train = 1;
            // (re-deriving counts: train takes the first shuffled item)
            if (n_val > d - n_train) n_val = d - n_train;
        }
        g.train[u].assign(items.begin(), items.begin() + n_train);
        g.val[u].assign(items.begin() + n_train, items.begin() + n_train + n_val);
        g.test[u].assign(items.begin() + n_train + n_val, items.end());
        std::sort(g.train[u].begin(), g.train[u].end());
        std::sort(g.val[u].begin(), g.val[u].end());
        std::sort(g.test[u].begin(), g.test[u].end());
    }

    g.user_degree.assign(g.num_users, 0);
    g.item_degree.assign(g.num_items, 0);
    for (std::size_t u = 0; u < g.num_users; ++u) {
        g.user_degree[u] = static_cast<std::int64_t>(g.train[u].size());
        for (auto v : g.train[u]) ++g.item_degree[v];
    }
    return g;
}

Csr build_adjacency(const InteractionGraph& graph) {
    const std::size_t nu = graph.num_users;
    const std::size_t n = graph.num_nodes();
    if (graph.num_train_pairs() == 0) throw DataError("build_adjacency: empty training set");

    Csr adj;
    adj.n = n;
    adj.row_ptr.assign(n + 1, 0);
    for (std::size_t u = 0; u < nu; ++u) {
        adj.row_ptr[u + 1] = static_cast<std::int64_t>(graph.train[u].size());
    }
    for (std::size_t v = 0; v < graph.num_items; ++v) {
        adj.row_ptr[nu + v + 1] = graph.item_degree[v];
    }
    for (std::size_t r = 0; r < n; ++r) adj.row_ptr[r + 1] += adj.row_ptr[r];
    adj.col_idx.resize(adj.row_ptr[n]);
    adj.values.resize(adj.row_ptr[n]);

    std::vector<std::int64_t> fill(n, 0);
    for (std::size_t u = 0; u < nu; ++u) {
        for (auto v : graph.train[u]) {
            const double w = 1.0 / std::sqrt(static_cast<double>(graph.user_degree[u]) *
                                             static_cast<double>(graph.item_degree[v]));
            const std::size_t item_row = nu + static_cast<std::size_t>(v);
            adj.col_idx[adj.row_ptr[u] + fill[u]] = static_cast<std::int32_t>(item_row);
            adj.values[adj.row_ptr[u] + fill[u]] = w;
            ++fill[u];
            adj.col_idx[adj.row_ptr[item_row] + fill[item_row]] = static_cast<std::int32_t>(u);
            adj.values[adj.row_ptr[item_row] + fill[item_row]] = w;
            ++fill[item_row];
        }
    }
    // User rows are sorted by construction (train lists are sorted); item
    // rows are sorted because users are visited in ascending order.
    return adj;
}

namespace {

void write_grouped(const std::string& path, const InteractionGraph& g,
                   const std::vector<std::vector<std::int32_t>>& lists) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t u = 0; u < g.num_users; ++u) {
        if (lists[u].empty()) continue;
        out << g.user_ids[u];
        for (auto v : lists[u]) out << ' ' << g.item_ids[v];
        out << '\n';
    }
}

void write_id_map(const std::string& path, const std::vector<std::string>& ids) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out << ids[i] << '\t' << i << '\n';
    }
}

std::vector<std::string> read_id_map(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::string> ids;
    std::string id;
    std::size_t idx;
    while (in >> id >> idx) {
        if (idx != ids.size()) throw DataError("id map " + path + " is not densely ordered");
        ids.push_back(id);
    }
    return ids;
}

} // namespace

void write_prepared(const InteractionGraph& graph, const std::string& out_dir) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    write_grouped(out_dir + "/train.txt", graph, graph.train);
    write_grouped(out_dir + "/val.txt", graph, graph.val);
    write_grouped(out_dir + "/test.txt", graph, graph.test);
    write_id_map(out_dir + "/user_map.txt", graph.user_ids);
    write_id_map(out_dir + "/item_map.txt", graph.item_ids);
}

InteractionGraph read_prepared(const std::string& dir) {
    InteractionGraph g;
    g.user_ids = read_id_map(dir + "/user_map.txt");
    g.item_ids = read_id_map(dir + "/item_map.txt");
    g.num_users = g.user_ids.size();
    g.num_items = g.item_ids.size();

    std::unordered_map<std::string, std::int32_t> uidx, iidx;
    for (std::size_t i = 0; i < g.user_ids.size(); ++i) uidx[g.user_ids[i]] = static_cast<std::int32_t>(i);
    for (std::size_t i = 0; i < g.item_ids.size(); ++i) iidx[g.item_ids[i]] = static_cast<std::int32_t>(i);

    auto read_grouped = [&](const std::string& path) {
        std::vector<std::vector<std::int32_t>> lists(g.num_users);
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            auto toks = tokenize(line);
            if (toks.empty()) continue;
            auto uit = uidx.find(toks[0]);
            if (uit == uidx.end()) {
                throw DataError(path + " line " + std::to_string(line_no) +
                                ": unknown user id " + toks[0]);
            }
            for (std::size_t i = 1; i < toks.size(); ++i) {
                auto iit = iidx.find(toks[i]);
                if (iit == iidx.end()) {
                    throw DataError(path + " line " + std::to_string(line_no) +
                                    ": unknown item id " + toks[i]);
                }
                lists[uit->second].push_back(iit->second);
            }
        }
        for (auto& l : lists) std::sort(l.begin(), l.end());
        return lists;
    };

    g.train = read_grouped(dir + "/train.txt");
    g.val = read_grouped(dir + "/val.txt");
    g.test = read_grouped(dir + "/test.txt");

    g.user_degree.assign(g.num_users, 0);
    g.item_degree.assign(g.num_items, 0);
    for (std::size_t u = 0; u < g.num_users; ++u) {
        g.user_degree[u] = static_cast<std::int64_t>(g.train[u].size());
        for (auto v : g.train[u]) ++g.item_degree[v];
    }
    return g;
}

} // namespace hmlet
