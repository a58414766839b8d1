#include "alcove/initpool.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "alcove/geometry.hpp"
#include "alcove/rng.hpp"

namespace alcove {

namespace {

void check_budget(const IndexList& train, int b) {
    if (b < 0 || static_cast<std::size_t>(b) > train.size())
        throw std::invalid_argument(fmt::format("initial pool of {} exceeds the {} train points", b, train.size()));
}

}  // namespace

IndexList random_init(const IndexList& train_indices, int b, std::uint64_t seed) {
    check_budget(train_indices, b);
    Rng rng(derive_seed(seed, "init.random"));
    return sample_without_replacement(train_indices, b, rng);
}

IndexList centroid_init(const Matrix& features, const IndexList& train_indices, int b, std::uint64_t seed) {
    check_budget(train_indices, b);
    if (b == 0) return {};
    const Matrix pts = gather_rows(features, train_indices);
    const Clustering cl = kmeans(pts, b, derive_seed(seed, "init.centroid"));

    IndexList picks = nearest_to_centroids(pts, cl);
    if (static_cast<int>(picks.size()) < b) {
        // Members of each cluster ordered by distance to their centroid.
        std::vector<std::vector<std::pair<double, Index>>> members(static_cast<std::size_t>(cl.k()));
        for (Index i = 0; i < pts.rows(); ++i)
            members[cl.assignments[i]].emplace_back(sq_dist(pts, i, cl.centroids, cl.assignments[i]), i);
        std::vector<int> by_size(static_cast<std::size_t>(cl.k()));
        std::iota(by_size.begin(), by_size.end(), 0);
        for (auto& m : members) std::sort(m.begin(), m.end());
        std::stable_sort(by_size.begin(), by_size.end(),
                         [&](int a, int c) { return members[a].size() > members[c].size(); });
        std::vector<std::size_t> cursor(members.size(), 0);
        while (static_cast<int>(picks.size()) < b) {
            for (int c : by_size) {
                auto& cur = cursor[c];
                while (cur < members[c].size() &&
                       std::find(picks.begin(), picks.end(), members[c][cur].second) != picks.end())
                    ++cur;
                if (cur < members[c].size()) {
                    picks.push_back(members[c][cur++].second);
                    if (static_cast<int>(picks.size()) == b) break;
                }
            }
        }
    }
    IndexList out;
    out.reserve(picks.size());
    for (Index p : picks) out.push_back(train_indices[p]);
    return out;
}

}  // namespace alcove
