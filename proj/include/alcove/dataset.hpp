#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "alcove/types.hpp"

namespace alcove {

// N×d embedding matrix plus hidden labels and a train/test split.
// Immutable once validated; safe to share across threads.
struct EmbeddingDataset {
    Matrix features;
    std::vector<int> labels;
    int num_classes = 0;
    IndexList train_indices;
    IndexList test_indices;

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }

    // Throws DatasetError naming the first violated invariant.
    void validate() const;
};

// Partition of the train split into labeled and unlabeled indices.
// `labeled` keeps query order; `unlabeled` is kept ascending.
struct PoolState {
    IndexList labeled;
    IndexList unlabeled;
    int iteration = 0;

    static PoolState from_train(const IndexList& train_indices);

    // Moves `picked` from unlabeled to labeled. Throws if any index is not
    // currently unlabeled or appears twice.
    void reveal(const IndexList& picked);
};

// Reads `dataset.json` (or `<dir>/dataset.json` when given a directory).
EmbeddingDataset load_dataset(const std::filesystem::path& manifest_path);

// Writes manifest, features.bin, labels.bin, train.json and test.json into
// `dir`. Refuses to touch an existing manifest unless `overwrite` is set, in
// which case every file is written to a temporary and renamed into place.
std::filesystem::path save_dataset(const EmbeddingDataset& dataset,
                                   const std::filesystem::path& dir,
                                   bool overwrite = false);

// C isotropic unit-variance Gaussian blobs. Class c has its mean at
// s·(1 + c/d) along column (c mod d) of a seeded random orthonormal basis,
// so every pair of means is at least s apart. Stratified 80/20 split, rows
// class-major. Coordinates are rounded to float so the dataset survives a
// save/load round trip bit-exactly.
EmbeddingDataset generate_synthetic(int num_classes, int per_class, int dim, double separation,
                                    std::uint64_t seed);

}  // namespace alcove
