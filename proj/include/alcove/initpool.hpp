#pragma once

#include <cstdint>

#include "alcove/types.hpp"

namespace alcove {

// Cold-start pools: both return exactly b distinct train indices.

IndexList random_init(const IndexList& train_indices, int b, std::uint64_t seed);

// k-means with k = b over the train features; the member nearest each
// centroid. Collapsed clusters are topped up with the next-nearest members
// of the largest clusters.
IndexList centroid_init(const Matrix& features, const IndexList& train_indices, int b, std::uint64_t seed);

}  // namespace alcove
