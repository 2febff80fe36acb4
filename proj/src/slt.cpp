#include "cfbench/slt.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <set>

#include "cfbench/errors.hpp"

namespace cfbench {

namespace {

struct PartitionRow {
    const char* name;
    std::array<int, 9> d1;
    std::size_t d1_size;
};

// Class assignments of the partition tasks; D2 is the complement of D1.
constexpr std::array<PartitionRow, 11> kPartitions{{
    {"D5-5a", {0, 1, 2, 3, 4}, 5},
    {"D5-5b", {0, 2, 4, 6, 8}, 5},
    {"D5-5c", {3, 4, 6, 8, 9}, 5},
    {"D5-5d", {0, 2, 5, 6, 7}, 5},
    {"D5-5e", {0, 1, 3, 4, 5}, 5},
    {"D5-5f", {0, 3, 4, 8, 9}, 5},
    {"D5-5g", {0, 5, 6, 7, 8}, 5},
    {"D5-5h", {0, 2, 3, 6, 8}, 5},
    {"D9-1a", {0, 1, 2, 3, 4, 5, 6, 7, 8}, 9},
    {"D9-1b", {1, 2, 3, 4, 5, 6, 7, 8, 9}, 9},
    {"D9-1c", {0, 2, 3, 4, 5, 6, 7, 8, 9}, 9},
}};

Dataset filter_classes(const Dataset& ds, const std::vector<int>& classes) {
    const std::set<int> keep(classes.begin(), classes.end());
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (keep.contains(ds.labels()[i]))
            idx.push_back(i);
    return ds.subset(idx);
}

}  // namespace

std::string to_string(SltType type) {
    switch (type) {
        case SltType::D5_5: return "D5-5";
        case SltType::D9_1: return "D9-1";
        case SltType::DP10_10: return "DP10-10";
    }
    return "?";
}

SltType slt_type_from_string(const std::string& s) {
    if (s == "D5-5")
        return SltType::D5_5;
    if (s == "D9-1")
        return SltType::D9_1;
    if (s == "DP10-10")
        return SltType::DP10_10;
    throw ConfigError("unknown SLT type '" + s + "'");
}

SltSpec make_slt(const std::string& name) {
    if (name == "DP10-10") {
        SltSpec s;
        s.name = name;
        s.kind = SltKind::Permutation;
        s.type = SltType::DP10_10;
        s.d1_classes = s.d2_classes = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
        s.perm_seed_1 = std::nullopt;
        s.perm_seed_2 = kDefaultPermutationSeed;
        return s;
    }
    for (const auto& row : kPartitions) {
        if (name != row.name)
            continue;
        SltSpec s;
        s.name = name;
        s.kind = SltKind::Partition;
        s.type = row.d1_size == 9 ? SltType::D9_1 : SltType::D5_5;
        s.d1_classes.assign(row.d1.begin(), row.d1.begin() + static_cast<std::ptrdiff_t>(row.d1_size));
        for (int c = 0; c < 10; ++c)
            if (std::find(s.d1_classes.begin(), s.d1_classes.end(), c) == s.d1_classes.end())
                s.d2_classes.push_back(c);
        return s;
    }
    throw ConfigError("unknown SLT '" + name + "'");
}

std::vector<SltSpec> list_slts(const std::string& filter) {
    if (filter != "all" && filter != "D5-5" && filter != "D9-1" && filter != "DP10-10")
        throw ConfigError("unknown SLT filter '" + filter + "' (expected D5-5, D9-1, DP10-10 or all)");
    std::vector<SltSpec> out;
    for (const auto& row : kPartitions) {
        SltSpec s = make_slt(row.name);
        if (filter == "all" || filter == to_string(s.type))
            out.push_back(std::move(s));
    }
    if (filter == "all" || filter == "DP10-10")
        out.push_back(make_slt("DP10-10"));
    return out;
}

std::vector<std::size_t> pixel_permutation(const InputDims& dims,
                                           std::optional<std::uint64_t> seed) {
    const std::size_t n = dims.height * dims.width;
    if (!seed) {
        std::vector<std::size_t> id(n);
        std::iota(id.begin(), id.end(), std::size_t{0});
        return id;
    }
    RngStream rng(*seed);
    return rng.permutation(n);
}

std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm) {
    std::vector<std::size_t> inv(perm.size());
    for (std::size_t j = 0; j < perm.size(); ++j)
        inv.at(perm[j]) = j;
    return inv;
}

Tensor permute_pixels(const Tensor& images, const InputDims& dims,
                      const std::vector<std::size_t>& perm) {
    const std::size_t pixels = dims.height * dims.width;
    if (perm.size() != pixels)
        throw ConfigError("permutation length does not match the image size");
    const std::size_t c = dims.channels;
    const std::size_t flat = dims.flat();
    const std::size_t n = flat == 0 ? 0 : images.size() / flat;
    Tensor out = images;
    for (std::size_t s = 0; s < n; ++s) {
        const double* src = images.data.data() + s * flat;
        double* dst = out.data.data() + s * flat;
        for (std::size_t j = 0; j < pixels; ++j)
            std::copy_n(src + perm[j] * c, c, dst + j * c);
    }
    return out;
}

Dataset permute_pixels(const Dataset& ds, const std::vector<std::size_t>& perm) {
    return Dataset(permute_pixels(ds.images(), ds.dims(), perm),
                   std::vector<int>(ds.labels().begin(), ds.labels().end()), ds.split());
}

SltInstance apply_slt(const SltSpec& spec, const DatasetPair& base) {
    if (base.train.empty() || base.test.empty())
        throw DataError("SLT construction needs non-empty train and test splits");
    SltInstance inst;
    if (spec.kind == SltKind::Partition) {
        inst.d1 = {filter_classes(base.train, spec.d1_classes),
                   filter_classes(base.test, spec.d1_classes)};
        inst.d2 = {filter_classes(base.train, spec.d2_classes),
                   filter_classes(base.test, spec.d2_classes)};
    } else {
        const auto p1 = pixel_permutation(base.train.dims(), spec.perm_seed_1);
        const auto p2 = pixel_permutation(base.train.dims(), spec.perm_seed_2);
        inst.d1 = {permute_pixels(base.train, p1), permute_pixels(base.test, p1)};
        inst.d2 = {permute_pixels(base.train, p2), permute_pixels(base.test, p2)};
    }
    inst.joint = {concat(inst.d1.train, inst.d2.train), concat(inst.d1.test, inst.d2.test)};
    return inst;
}

}  // namespace cfbench
