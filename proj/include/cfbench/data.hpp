#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfbench/network.hpp"
#include "cfbench/rng.hpp"
#include "cfbench/tensor.hpp"

namespace cfbench {

enum class Split { Train, Test };

/// Labelled image set. Images are (n, H, W, C) with values in [0, 1].
/// Raw (pre-selection) datasets may carry any nonnegative class ids;
/// after select_top_classes they are in 0..9.
class Dataset {
public:
    Dataset() = default;
    Dataset(Tensor images, std::vector<int> labels, Split split = Split::Train);

    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    const Tensor& images() const noexcept { return images_; }
    std::span<const int> labels() const noexcept { return labels_; }
    InputDims dims() const noexcept { return dims_; }
    Split split() const noexcept { return split_; }

    std::span<const double> image(std::size_t i) const { return images_.row(i); }

    /// Per-class sample counts, keyed by label.
    std::map<int, std::size_t> class_counts() const;

    /// Rows `indices` as an (k, H, W, C) tensor.
    Tensor gather(std::span<const std::size_t> indices) const;
    std::vector<int> gather_labels(std::span<const std::size_t> indices) const;
    Dataset subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    Tensor images_;
    std::vector<int> labels_;
    InputDims dims_{};
    Split split_ = Split::Train;
};

/// Concatenation; dims must agree. The result takes the split of `a`.
Dataset concat(const Dataset& a, const Dataset& b);

/// Throws DataError unless labels are in 0..9, pixels in [0, 1] and sizes agree.
void validate_dataset(const Dataset& ds);

struct DatasetPair {
    Dataset train;
    Dataset test;
};

// ---- IDX container ----

/// Parses IDX image + label files (optionally gzip-compressed). Images may be
/// rank 3 (n, rows, cols) or rank 4 (n, rows, cols, channels); bytes are scaled by 1/255.
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split = Split::Train);

/// In-memory variants of the parsers, used by load_idx.
Tensor parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes);

/// Serializes a dataset back to uncompressed IDX. Pixels are round(v * 255).
void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels);
std::vector<std::uint8_t> encode_idx_images(const Dataset& ds);
std::vector<std::uint8_t> encode_idx_labels(const Dataset& ds);

/// Reads a whole file, transparently inflating gzip.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

// ---- CSV ----

/// `label,p0,p1,...` with pixel values 0..255. Geometry defaults to square grayscale.
Dataset load_csv(const std::filesystem::path& path, Split split = Split::Train,
                 std::optional<InputDims> dims = std::nullopt);

// ---- class selection ----

struct ClassSelection {
    std::vector<int> kept_classes;  // original ids, position = new label
    std::map<int, int> relabel;     // original id -> 0..9
};

/// Keeps the 10 best-represented classes of the train split (ties: lower id);
/// a perfectly balanced train split draws 10 classes with `rng` instead.
/// The same selection and relabelling is applied to the test split.
std::pair<DatasetPair, ClassSelection> select_top_classes(const DatasetPair& raw, RngStream& rng);

/// Applies a fixed selection (relabel + filter) to one dataset, keeping order.
Dataset apply_selection(const Dataset& ds, const ClassSelection& selection);

/// Largest percentual difference in sample count between any two classes.
double class_balance_stat(const Dataset& ds);

/// Largest difference between two class shares, in percentage points of the
/// whole set: 100 * (max_c n_c - min_c n_c) / n. This is the statistic that
/// reproduces the published imbalance figures (MNIST train: 2.2).
double class_share_spread(const Dataset& ds);

/// Caps every class at `max_per_class` samples, keeping the first ones in file order.
Dataset cap_per_class(const Dataset& ds, std::size_t max_per_class);

// ---- synthetic data ----

struct BlobParams {
    std::size_t n_per_class = 100;
    std::size_t dims = 16;        // features; images are (n, 1, dims, 1)
    double separation = 10.0;     // center spread in units of the cluster std
    double cluster_std = 0.05;
};

/// Ten Gaussian clusters clipped to [0, 1]^dims.
Dataset synthetic_blobs(const BlobParams& params, RngStream& rng, Split split = Split::Train);

/// Train and test sets drawn around the same ten centers.
DatasetPair synthetic_blob_splits(const BlobParams& params, std::size_t n_test_per_class,
                                  RngStream& rng);

}  // namespace cfbench
