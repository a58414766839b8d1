#include "alcove/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include <Eigen/QR>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "alcove/rng.hpp"

namespace alcove {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kManifestName = "dataset.json";
constexpr const char* kFeaturesName = "features.bin";
constexpr const char* kLabelsName = "labels.bin";
constexpr const char* kTrainName = "train.json";
constexpr const char* kTestName = "test.json";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError(fmt::format("cannot open {}", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DatasetError(fmt::format("cannot write {}", path.string()));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DatasetError(fmt::format("short write to {}", path.string()));
}

void put_u32le(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

std::uint32_t get_u32le(const std::string& in, std::size_t offset) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[offset + b])) << (8 * b);
    return v;
}

IndexList read_index_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw DatasetError(fmt::format("{}: {}", path.string(), e.what()));
    }
    if (!j.is_array()) throw DatasetError(fmt::format("{}: expected a JSON array", path.string()));
    IndexList out;
    out.reserve(j.size());
    for (const auto& v : j) {
        if (!v.is_number_integer()) throw DatasetError(fmt::format("{}: non-integer index", path.string()));
        out.push_back(v.get<Index>());
    }
    return out;
}

std::string index_json(const IndexList& idx) { return json(idx).dump(); }

}  // namespace

void EmbeddingDataset::validate() const {
    const Index n = size();
    if (num_classes < 2) throw DatasetError("num_classes must be at least 2");
    if (static_cast<Index>(labels.size()) != n)
        throw DatasetError(fmt::format("label count {} does not match row count {}", labels.size(), n));
    if (!features.allFinite()) throw DatasetError("features contain non-finite values");
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes)
            throw DatasetError(fmt::format("label {} at row {} outside [0, {})", labels[i], i, num_classes));
    }
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    auto mark = [&](const IndexList& idx, const char* which) {
        for (Index i : idx) {
            if (i < 0 || i >= n) throw DatasetError(fmt::format("{} index {} out of range", which, i));
            if (seen[i]) throw DatasetError(fmt::format("index {} appears twice in the split", i));
            seen[i] = 1;
        }
    };
    mark(train_indices, "train");
    mark(test_indices, "test");
    if (train_indices.size() + test_indices.size() != static_cast<std::size_t>(n))
        throw DatasetError("train and test indices do not cover every row");
    std::vector<char> present(static_cast<std::size_t>(num_classes), 0);
    for (Index i : train_indices) present[labels[i]] = 1;
    for (int c = 0; c < num_classes; ++c) {
        if (!present[c]) throw DatasetError(fmt::format("class {} has no training example", c));
    }
}

PoolState PoolState::from_train(const IndexList& train_indices) {
    PoolState p;
    p.unlabeled = train_indices;
    std::sort(p.unlabeled.begin(), p.unlabeled.end());
    return p;
}

void PoolState::reveal(const IndexList& picked) {
    IndexList sorted = picked;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw std::invalid_argument("reveal: duplicate index in batch");
    IndexList remaining;
    remaining.reserve(unlabeled.size());
    std::set_difference(unlabeled.begin(), unlabeled.end(), sorted.begin(), sorted.end(),
                        std::back_inserter(remaining));
    if (remaining.size() + sorted.size() != unlabeled.size())
        throw std::invalid_argument("reveal: index is not in the unlabeled pool");
    unlabeled = std::move(remaining);
    labeled.insert(labeled.end(), picked.begin(), picked.end());
}

EmbeddingDataset load_dataset(const fs::path& manifest_path) {
    fs::path manifest = manifest_path;
    if (fs::is_directory(manifest)) manifest /= kManifestName;
    if (!fs::exists(manifest)) throw DatasetError(fmt::format("manifest {} not found", manifest.string()));
    const fs::path dir = manifest.parent_path();

    json m;
    try {
        m = json::parse(read_file(manifest));
    } catch (const json::exception& e) {
        throw DatasetError(fmt::format("{}: {}", manifest.string(), e.what()));
    }

    EmbeddingDataset ds;
    Index n = 0, d = 0;
    std::string features_name, labels_name, train_name, test_name;
    try {
        n = m.at("n").get<Index>();
        d = m.at("d").get<Index>();
        ds.num_classes = m.at("num_classes").get<int>();
        const auto dtype = m.at("dtype").get<std::string>();
        if (dtype != "f32le") throw DatasetError(fmt::format("unsupported dtype '{}'", dtype));
        features_name = m.at("features").get<std::string>();
        labels_name = m.at("labels").get<std::string>();
        train_name = m.at("train_indices").get<std::string>();
        test_name = m.at("test_indices").get<std::string>();
    } catch (const json::exception& e) {
        throw DatasetError(fmt::format("{}: {}", manifest.string(), e.what()));
    }
    if (n < 0 || d <= 0) throw DatasetError(fmt::format("invalid shape n={} d={}", n, d));

    const std::string fbytes = read_file(dir / features_name);
    const auto expected_f = static_cast<std::size_t>(n) * static_cast<std::size_t>(d) * 4;
    if (fbytes.size() != expected_f)
        throw DatasetError(fmt::format("features file has {} bytes, expected {} for n={} d={}",
                                       fbytes.size(), expected_f, n, d));
    ds.features.resize(n, d);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) {
            const auto off = static_cast<std::size_t>(i * d + j) * 4;
            ds.features(i, j) = static_cast<double>(std::bit_cast<float>(get_u32le(fbytes, off)));
        }
    }

    const std::string lbytes = read_file(dir / labels_name);
    if (lbytes.size() != static_cast<std::size_t>(n) * 4)
        throw DatasetError(fmt::format("labels file has {} bytes, expected {}", lbytes.size(), n * 4));
    ds.labels.resize(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) {
        const std::uint32_t v = get_u32le(lbytes, static_cast<std::size_t>(i) * 4);
        if (v >= static_cast<std::uint32_t>(std::max(ds.num_classes, 0)))
            throw DatasetError(fmt::format("label {} at row {} is not below num_classes={}", v, i, ds.num_classes));
        ds.labels[i] = static_cast<int>(v);
    }

    ds.train_indices = read_index_file(dir / train_name);
    ds.test_indices = read_index_file(dir / test_name);
    ds.validate();
    return ds;
}

fs::path save_dataset(const EmbeddingDataset& dataset, const fs::path& dir, bool overwrite) {
    dataset.validate();
    const fs::path manifest = dir / kManifestName;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw DatasetError(fmt::format("cannot create directory {}", dir.string()));
    if (fs::exists(manifest) && !overwrite)
        throw DatasetError(fmt::format("{} already exists; refusing to overwrite", manifest.string()));

    std::string fbytes;
    fbytes.reserve(static_cast<std::size_t>(dataset.features.size()) * 4);
    for (Index i = 0; i < dataset.size(); ++i)
        for (Index j = 0; j < dataset.dim(); ++j)
            put_u32le(fbytes, std::bit_cast<std::uint32_t>(static_cast<float>(dataset.features(i, j))));
    std::string lbytes;
    lbytes.reserve(dataset.labels.size() * 4);
    for (int l : dataset.labels) put_u32le(lbytes, static_cast<std::uint32_t>(l));

    const json m = {{"n", dataset.size()},
                    {"d", dataset.dim()},
                    {"num_classes", dataset.num_classes},
                    {"dtype", "f32le"},
                    {"features", kFeaturesName},
                    {"labels", kLabelsName},
                    {"train_indices", kTrainName},
                    {"test_indices", kTestName}};

    const std::vector<std::pair<std::string, std::string>> files = {
        {kFeaturesName, fbytes},
        {kLabelsName, lbytes},
        {kTrainName, index_json(dataset.train_indices)},
        {kTestName, index_json(dataset.test_indices)},
        {kManifestName, m.dump(2) + "\n"},  // last, so a manifest implies complete data
    };
    for (const auto& [name, bytes] : files) write_file(dir / (name + ".tmp"), bytes);
    for (const auto& [name, bytes] : files) {
        fs::rename(dir / (name + ".tmp"), dir / name, ec);
        if (ec) throw DatasetError(fmt::format("cannot move {} into place: {}", name, ec.message()));
    }
    return manifest;
}

EmbeddingDataset generate_synthetic(int num_classes, int per_class, int dim, double separation,
                                    std::uint64_t seed) {
    if (num_classes < 2 || per_class < 2 || dim < 2 || !(separation >= 0.0))
        throw std::invalid_argument("generate_synthetic: need C >= 2, n_c >= 2, d >= 2, s >= 0");

    EmbeddingDataset ds;
    ds.num_classes = num_classes;
    const Index n = static_cast<Index>(num_classes) * per_class;
    ds.features.resize(n, dim);
    ds.labels.resize(static_cast<std::size_t>(n));

    // Means sit on the columns of a random orthonormal basis rather than the
    // raw coordinate axes, so no single coordinate carries a class on its own.
    Rng basis_rng(derive_seed(seed, "synthetic.basis"));
    Eigen::MatrixXd gauss(dim, dim);
    for (Index i = 0; i < dim; ++i)
        for (Index j = 0; j < dim; ++j) gauss(i, j) = basis_rng.normal();
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
    Eigen::MatrixXd basis = qr.householderQ();
    for (Index j = 0; j < dim; ++j)
        if (qr.matrixQR()(j, j) < 0.0) basis.col(j) *= -1.0;

    Rng feat_rng(derive_seed(seed, "synthetic.features"));
    for (int c = 0; c < num_classes; ++c) {
        // More classes than axes: stack further means along the same axes at
        // integer multiples of s, which keeps every pair at least s apart.
        const int axis = c % dim;
        const double scale = separation * static_cast<double>(1 + c / dim);
        const Vector mean = scale * basis.col(axis);
        for (int k = 0; k < per_class; ++k) {
            const Index row = static_cast<Index>(c) * per_class + k;
            ds.labels[row] = c;
            for (int j = 0; j < dim; ++j) {
                const double v = feat_rng.normal() + mean(j);
                ds.features(row, j) = static_cast<double>(static_cast<float>(v));
            }
        }
    }

    Rng split_rng(derive_seed(seed, "synthetic.split"));
    const auto n_test = static_cast<Index>(std::lround(0.2 * per_class));
    for (int c = 0; c < num_classes; ++c) {
        IndexList rows(static_cast<std::size_t>(per_class));
        std::iota(rows.begin(), rows.end(), static_cast<Index>(c) * per_class);
        for (Index i = per_class - 1; i > 0; --i) std::swap(rows[i], rows[split_rng.uniform_index(i + 1)]);
        ds.test_indices.insert(ds.test_indices.end(), rows.begin(), rows.begin() + n_test);
        ds.train_indices.insert(ds.train_indices.end(), rows.begin() + n_test, rows.end());
    }
    std::sort(ds.train_indices.begin(), ds.train_indices.end());
    std::sort(ds.test_indices.begin(), ds.test_indices.end());
    ds.validate();
    return ds;
}

}  // namespace alcove
