#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cfbench {

/// Invalid layer chain, hyper-parameters, manifest contents, shape mismatch.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Every problem found while validating a manifest, each prefixed with its JSON path.
class ManifestError : public ConfigError {
public:
    explicit ManifestError(std::vector<std::string> problems)
        : ConfigError(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    static std::string join(const std::vector<std::string>& problems) {
        std::string out = "invalid manifest:";
        for (const auto& p : problems)
            out += "\n  " + p;
        return out;
    }

    std::vector<std::string> problems_;
};

/// Problems with dataset contents: empty sets, labels out of range, missing splits.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed IDX / CSV input. Carries the byte offset at which parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Non-finite values produced during a forward/backward pass.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, std::ptrdiff_t layer)
        : std::runtime_error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}

    /// Index of the offending layer, -1 for the loss itself.
    std::ptrdiff_t layer() const noexcept { return layer_; }

private:
    std::ptrdiff_t layer_;
};

}  // namespace cfbench
