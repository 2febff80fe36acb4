#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cfbench/data.hpp"

namespace cfbench {

enum class SltKind { Partition, Permutation };
enum class SltType { D5_5, D9_1, DP10_10 };

std::string to_string(SltType type);
SltType slt_type_from_string(const std::string& s);

/// Declarative two-phase task. Partition tasks split the 10 classes between
/// D1 and D2; the permutation task applies a pixel permutation to every image
/// (std::nullopt seed = identity).
struct SltSpec {
    std::string name;
    SltKind kind = SltKind::Partition;
    SltType type = SltType::D5_5;
    std::vector<int> d1_classes;
    std::vector<int> d2_classes;
    std::optional<std::uint64_t> perm_seed_1;
    std::optional<std::uint64_t> perm_seed_2;
};

inline constexpr std::uint64_t kDefaultPermutationSeed = 0x5EED0002;

/// Named tasks D5-5a..h, D9-1a..c, DP10-10.
SltSpec make_slt(const std::string& name);

/// filter: "D5-5", "D9-1", "DP10-10" or "all".
std::vector<SltSpec> list_slts(const std::string& filter = "all");

struct SltInstance {
    DatasetPair d1;
    DatasetPair d2;
    DatasetPair joint;
};

/// Materializes the sub-task datasets. Labels are never remapped.
SltInstance apply_slt(const SltSpec& spec, const DatasetPair& base);

/// Permutation of the H*W pixel positions drawn from `seed` (channels move together).
std::vector<std::size_t> pixel_permutation(const InputDims& dims, std::optional<std::uint64_t> seed);
std::vector<std::size_t> invert_permutation(const std::vector<std::size_t>& perm);

/// out pixel j = in pixel perm[j].
Dataset permute_pixels(const Dataset& ds, const std::vector<std::size_t>& perm);
Tensor permute_pixels(const Tensor& images, const InputDims& dims,
                      const std::vector<std::size_t>& perm);

}  // namespace cfbench
