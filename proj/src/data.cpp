#include "cfbench/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cfbench/errors.hpp"

namespace cfbench {

// ---- Dataset ----

Dataset::Dataset(Tensor images, std::vector<int> labels, Split split)
    : images_(std::move(images)), labels_(std::move(labels)), split_(split) {
    if (images_.rank() == 4) {
        dims_ = {images_.dim(1), images_.dim(2), images_.dim(3)};
    } else if (images_.rank() == 2) {
        dims_ = {1, images_.dim(1), 1};
        images_.shape = {images_.dim(0), 1, images_.dim(1), 1};
    } else if (images_.rank() == 0 && labels_.empty()) {
        images_.shape = {0, 1, 1, 1};
        dims_ = {1, 1, 1};
    } else {
        throw DataError("images must be (n, H, W, C) or (n, features)");
    }
    if (images_.dim(0) != labels_.size())
        throw DataError("image count " + std::to_string(images_.dim(0)) +
                        " does not match label count " + std::to_string(labels_.size()));
}

std::map<int, std::size_t> Dataset::class_counts() const {
    std::map<int, std::size_t> counts;
    for (int y : labels_)
        ++counts[y];
    return counts;
}

Tensor Dataset::gather(std::span<const std::size_t> indices) const {
    const std::size_t d = dims_.flat();
    Tensor out({indices.size(), dims_.height, dims_.width, dims_.channels});
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= size())
            throw DataError("sample index out of range");
        std::copy_n(images_.data.begin() + static_cast<std::ptrdiff_t>(indices[i] * d), d,
                    out.data.begin() + static_cast<std::ptrdiff_t>(i * d));
    }
    return out;
}

std::vector<int> Dataset::gather_labels(std::span<const std::size_t> indices) const {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i)
        out[i] = labels_.at(indices[i]);
    return out;
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out(gather(indices), gather_labels(indices), split_);
    out.dims_ = dims_;
    return out;
}

Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.empty())
        return Dataset(b.images(), std::vector<int>(b.labels().begin(), b.labels().end()), a.split());
    if (b.empty())
        return a;
    if (!(a.dims() == b.dims()))
        throw DataError("cannot concatenate datasets with different image dimensions");
    Tensor images = a.images();
    images.shape[0] += b.size();
    images.data.insert(images.data.end(), b.images().data.begin(), b.images().data.end());
    std::vector<int> labels(a.labels().begin(), a.labels().end());
    labels.insert(labels.end(), b.labels().begin(), b.labels().end());
    return Dataset(std::move(images), std::move(labels), a.split());
}

void validate_dataset(const Dataset& ds) {
    if (ds.images().rank() != 4 || ds.images().dim(0) != ds.size())
        throw DataError("image tensor does not match label count");
    if (ds.images().size() != ds.size() * ds.dims().flat())
        throw DataError("image tensor size does not match dimensions");
    for (int y : ds.labels())
        if (y < 0 || y > 9)
            throw DataError("label " + std::to_string(y) + " outside 0..9");
    for (double v : ds.images().data)
        if (!(v >= 0.0 && v <= 1.0))
            throw DataError("pixel value outside [0, 1]");
}

// ---- IDX ----

namespace {

constexpr std::uint32_t kIdxLabels = 0x00000801;
constexpr std::uint32_t kIdxImages3 = 0x00000803;
constexpr std::uint32_t kIdxImages4 = 0x00000804;

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
    if (offset + 4 > bytes.size())
        throw FormatError("truncated IDX header", bytes.size());
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex(std::uint32_t v) {
    std::ostringstream s;
    s << "0x" << std::hex << v;
    return s.str();
}

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& in) {
    z_stream zs{};
    if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
        throw FormatError("cannot initialise gzip decoder", 0);
    zs.next_in = const_cast<Bytef*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> chunk(1 << 16);
    int rc = Z_OK;
    while (rc != Z_STREAM_END) {
        zs.next_out = chunk.data();
        zs.avail_out = static_cast<uInt>(chunk.size());
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            const auto at = static_cast<std::size_t>(zs.total_in);
            inflateEnd(&zs);
            throw FormatError("corrupt gzip stream", at);
        }
        out.insert(out.end(), chunk.begin(),
                   chunk.begin() + static_cast<std::ptrdiff_t>(chunk.size() - zs.avail_out));
        if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
            inflateEnd(&zs);
            throw FormatError("truncated gzip stream", in.size());
        }
    }
    inflateEnd(&zs);
    return out;
}

}  // namespace

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b)
        return inflate_gzip(bytes);
    return bytes;
}

Tensor parse_idx_images(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kIdxImages3 && magic != kIdxImages4)
        throw FormatError("bad IDX image magic " + hex(magic) + ", expected 0x803 or 0x804", 0);
    const std::size_t rank = magic & 0xff;
    std::vector<std::size_t> shape;
    for (std::size_t d = 0; d < rank; ++d)
        shape.push_back(read_be32(bytes, 4 + 4 * d));
    if (rank == 3)
        shape.push_back(1);
    const std::size_t header = 4 + 4 * rank;
    const std::size_t count = shape_product(shape);
    if (bytes.size() < header + count)
        throw FormatError("truncated IDX image payload: expected " + std::to_string(count) +
                              " bytes",
                          bytes.size());
    if (bytes.size() > header + count)
        throw FormatError("trailing bytes after IDX image payload", header + count);
    Tensor t(shape);
    for (std::size_t i = 0; i < count; ++i)
        t.data[i] = static_cast<double>(bytes[header + i]) / 255.0;
    return t;
}

std::vector<int> parse_idx_labels(std::span<const std::uint8_t> bytes) {
    const std::uint32_t magic = read_be32(bytes, 0);
    if (magic != kIdxLabels)
        throw FormatError("bad IDX label magic " + hex(magic) + ", expected 0x801", 0);
    const std::size_t n = read_be32(bytes, 4);
    if (bytes.size() < 8 + n)
        throw FormatError("truncated IDX label payload: expected " + std::to_string(n) + " bytes",
                          bytes.size());
    if (bytes.size() > 8 + n)
        throw FormatError("trailing bytes after IDX label payload", 8 + n);
    return std::vector<int>(bytes.begin() + 8, bytes.end());
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 Split split) {
    Tensor img = parse_idx_images(read_file_bytes(images));
    std::vector<int> lab = parse_idx_labels(read_file_bytes(labels));
    if (img.dim(0) != lab.size())
        throw FormatError("image count " + std::to_string(img.dim(0)) + " in " + images.string() +
                              " does not match label count " + std::to_string(lab.size()) +
                              " in " + labels.string(),
                          4);
    return Dataset(std::move(img), std::move(lab), split);
}

std::vector<std::uint8_t> encode_idx_images(const Dataset& ds) {
    std::vector<std::uint8_t> out;
    const InputDims d = ds.dims();
    const bool gray = d.channels == 1;
    put_be32(out, gray ? kIdxImages3 : kIdxImages4);
    put_be32(out, static_cast<std::uint32_t>(ds.size()));
    put_be32(out, static_cast<std::uint32_t>(d.height));
    put_be32(out, static_cast<std::uint32_t>(d.width));
    if (!gray)
        put_be32(out, static_cast<std::uint32_t>(d.channels));
    out.reserve(out.size() + ds.images().size());
    for (double v : ds.images().data)
        out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
    return out;
}

std::vector<std::uint8_t> encode_idx_labels(const Dataset& ds) {
    std::vector<std::uint8_t> out;
    put_be32(out, kIdxLabels);
    put_be32(out, static_cast<std::uint32_t>(ds.size()));
    for (int y : ds.labels()) {
        if (y < 0 || y > 255)
            throw DataError("label does not fit in an IDX byte");
        out.push_back(static_cast<std::uint8_t>(y));
    }
    return out;
}

void write_idx(const Dataset& ds, const std::filesystem::path& images,
               const std::filesystem::path& labels) {
    auto dump = [](const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
        std::ofstream f(p, std::ios::binary);
        if (!f)
            throw DataError("cannot write " + p.string());
        f.write(reinterpret_cast<const char*>(bytes.data()),
                static_cast<std::streamsize>(bytes.size()));
    };
    dump(images, encode_idx_images(ds));
    dump(labels, encode_idx_labels(ds));
}

// ---- CSV ----

Dataset load_csv(const std::filesystem::path& path, Split split, std::optional<InputDims> dims) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot open " + path.string());
    std::string line;
    std::size_t offset = 0;
    if (!std::getline(f, line))
        throw FormatError("empty CSV file", 0);
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    const auto header_fields = std::count(line.begin(), line.end(), ',') + 1;
    if (line.rfind("label,", 0) != 0 || header_fields < 2)
        throw FormatError("CSV header must start with 'label,p0'", 0);
    const auto pixels = static_cast<std::size_t>(header_fields - 1);
    offset += line.size() + 1;

    std::vector<double> values;
    std::vector<int> labels;
    while (std::getline(f, line)) {
        const std::size_t line_start = offset;
        offset += line.size() + 1;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        std::size_t pos = 0;
        std::size_t field = 0;
        while (pos <= line.size()) {
            std::size_t comma = line.find(',', pos);
            if (comma == std::string::npos)
                comma = line.size();
            const std::string tok = line.substr(pos, comma - pos);
            char* end = nullptr;
            const long v = std::strtol(tok.c_str(), &end, 10);
            if (tok.empty() || *end != '\0')
                throw FormatError("non-integer CSV field '" + tok + "'", line_start + pos);
            if (field == 0) {
                if (v < 0)
                    throw FormatError("negative label", line_start + pos);
                labels.push_back(static_cast<int>(v));
            } else {
                if (v < 0 || v > 255)
                    throw FormatError("pixel value outside 0..255", line_start + pos);
                values.push_back(static_cast<double>(v) / 255.0);
            }
            ++field;
            pos = comma + 1;
        }
        if (field != pixels + 1)
            throw FormatError("row has " + std::to_string(field) + " fields, header has " +
                                  std::to_string(pixels + 1),
                              line_start);
    }

    InputDims d;
    if (dims) {
        d = *dims;
        if (d.flat() != pixels)
            throw FormatError("CSV pixel count does not match the requested dimensions", 0);
    } else {
        const auto side = static_cast<std::size_t>(std::lround(std::sqrt(double(pixels))));
        const auto side3 = static_cast<std::size_t>(std::lround(std::sqrt(double(pixels) / 3.0)));
        if (side * side == pixels)
            d = {side, side, 1};
        else if (3 * side3 * side3 == pixels)
            d = {side3, side3, 3};
        else
            d = {1, pixels, 1};
    }
    const std::size_t n = labels.size();
    return Dataset(Tensor({n, d.height, d.width, d.channels}, std::move(values)), std::move(labels),
                   split);
}

// ---- class selection ----

Dataset apply_selection(const Dataset& ds, const ClassSelection& selection) {
    std::vector<std::size_t> keep;
    std::vector<int> labels;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        auto it = selection.relabel.find(ds.labels()[i]);
        if (it != selection.relabel.end()) {
            keep.push_back(i);
            labels.push_back(it->second);
        }
    }
    Tensor images = ds.gather(keep);
    return Dataset(std::move(images), std::move(labels), ds.split());
}

std::pair<DatasetPair, ClassSelection> select_top_classes(const DatasetPair& raw, RngStream& rng) {
    const auto counts = raw.train.class_counts();
    if (counts.size() < Network::kClasses)
        throw DataError("need at least 10 classes, found " + std::to_string(counts.size()));

    std::vector<std::pair<int, std::size_t>> by_count(counts.begin(), counts.end());
    const bool balanced = std::all_of(by_count.begin(), by_count.end(), [&](const auto& c) {
        return c.second == by_count.front().second;
    });

    ClassSelection sel;
    if (balanced && by_count.size() > Network::kClasses) {
        auto order = rng.permutation(by_count.size());
        for (std::size_t i = 0; i < Network::kClasses; ++i)
            sel.kept_classes.push_back(by_count[order[i]].first);
    } else {
        // Highest count first, lower id on ties.
        std::stable_sort(by_count.begin(), by_count.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        for (std::size_t i = 0; i < Network::kClasses; ++i)
            sel.kept_classes.push_back(by_count[i].first);
    }
    std::sort(sel.kept_classes.begin(), sel.kept_classes.end());
    for (std::size_t i = 0; i < sel.kept_classes.size(); ++i)
        sel.relabel[sel.kept_classes[i]] = static_cast<int>(i);

    DatasetPair out{apply_selection(raw.train, sel), apply_selection(raw.test, sel)};
    return {std::move(out), std::move(sel)};
}

double class_balance_stat(const Dataset& ds) {
    const auto counts = ds.class_counts();
    if (counts.size() < 2)
        return 0.0;
    std::size_t lo = counts.begin()->second;
    std::size_t hi = lo;
    for (const auto& [label, c] : counts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    return 100.0 * static_cast<double>(hi - lo) / static_cast<double>(hi);
}

double class_share_spread(const Dataset& ds) {
    const auto counts = ds.class_counts();
    if (counts.size() < 2)
        return 0.0;
    std::size_t lo = counts.begin()->second;
    std::size_t hi = lo;
    for (const auto& [label, c] : counts) {
        lo = std::min(lo, c);
        hi = std::max(hi, c);
    }
    return 100.0 * static_cast<double>(hi - lo) / static_cast<double>(ds.size());
}

Dataset cap_per_class(const Dataset& ds, std::size_t max_per_class) {
    std::map<int, std::size_t> seen;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (seen[ds.labels()[i]]++ < max_per_class)
            keep.push_back(i);
    return ds.subset(keep);
}

// ---- synthetic data ----

namespace {

std::vector<std::vector<double>> blob_centers(const BlobParams& p, RngStream& rng) {
    if (!(p.separation > 0.0))
        throw ConfigError("blob separation must be positive");
    if (p.dims == 0)
        throw ConfigError("blob dimensionality must be positive");
    const double half_range = 0.5 * p.separation * p.cluster_std;
    std::vector<std::vector<double>> centers(Network::kClasses, std::vector<double>(p.dims));
    for (auto& c : centers)
        for (auto& v : c)
            v = 0.5 + half_range * rng.uniform(-1.0, 1.0);
    return centers;
}

Dataset sample_blobs(const std::vector<std::vector<double>>& centers, const BlobParams& p,
                     std::size_t n_per_class, RngStream& rng, Split split) {
    const std::size_t n = n_per_class * Network::kClasses;
    Tensor images({n, 1, p.dims, 1});
    std::vector<int> labels(n);
    std::size_t i = 0;
    for (std::size_t k = 0; k < Network::kClasses; ++k)
        for (std::size_t s = 0; s < n_per_class; ++s, ++i) {
            labels[i] = static_cast<int>(k);
            for (std::size_t d = 0; d < p.dims; ++d)
                images.data[i * p.dims + d] =
                    std::clamp(centers[k][d] + p.cluster_std * rng.normal(), 0.0, 1.0);
        }
    return Dataset(std::move(images), std::move(labels), split);
}

}  // namespace

Dataset synthetic_blobs(const BlobParams& p, RngStream& rng, Split split) {
    const auto centers = blob_centers(p, rng);
    return sample_blobs(centers, p, p.n_per_class, rng, split);
}

DatasetPair synthetic_blob_splits(const BlobParams& p, std::size_t n_test_per_class,
                                  RngStream& rng) {
    const auto centers = blob_centers(p, rng);
    Dataset train = sample_blobs(centers, p, p.n_per_class, rng, Split::Train);
    Dataset test = sample_blobs(centers, p, n_test_per_class, rng, Split::Test);
    return {std::move(train), std::move(test)};
}

}  // namespace cfbench
