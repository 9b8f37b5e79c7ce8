#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "semcom/tensor.hpp"

namespace semcom {

enum class Split { Train, Test };

std::string_view to_string(Split split);

/// Labeled images, (N, H, W, C) with pixel values in [0, 1].
struct Dataset {
    Tensor images;
    std::vector<int> labels;
    Split split = Split::Train;
    std::size_t num_classes = 10;

    std::size_t size() const { return labels.size(); }
    Shape image_shape() const { return Shape(images.shape().begin() + 1, images.shape().end()); }
    /// Per-class sample counts.
    std::vector<std::size_t> class_counts() const;
    /// Throws std::invalid_argument on count mismatch or out-of-range labels.
    void validate() const;
};

/// Rows [begin, end) of a dataset.
Dataset slice(const Dataset& data, std::size_t begin, std::size_t end);

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kCifarSide = 32;
inline constexpr std::size_t kCifarPixels = 32 * 32 * 3;
inline constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

/// Parses CIFAR-10 binary records: one label byte (0..9) followed by the
/// R, G and B planes, each 32x32 row-major. Pixels are scaled by 1/255.
Dataset parse_cifar10(std::span<const std::uint8_t> bytes, Split split = Split::Train);

/// Inverse of parse_cifar10 for datasets whose pixels are multiples of 1/255.
std::vector<std::uint8_t> serialize_cifar10(const Dataset& data);

Dataset load_cifar10_file(const std::filesystem::path& path, Split split);

/// Reads data_batch_1..5.bin and test_batch.bin from `directory`.
std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& directory);

struct SynthOptions {
    Shape image_shape{32, 32, 3};
    std::size_t classes = 10;
    /// Gaussian bumps per class mean image.
    std::size_t blobs = 2;
    /// Bump width as a fraction of the image side.
    double blob_width = 0.2;
    /// Peak per-channel amplitude of a bump around the 0.5 background.
    double amplitude = 0.35;
    /// Per-pixel within-class Gaussian noise.
    double noise_std = 0.1;
};

/// Class-conditioned Gaussian blob images clipped to [0, 1]: each class
/// mean is a grey background plus a few colored Gaussian bumps at
/// class-specific positions, and samples add i.i.d. pixel noise. Labels go
/// round-robin over classes. Class means depend only on `seed`, so the
/// Train and Test splits of one seed share them.
Dataset synth_dataset(std::size_t n, std::uint64_t seed, Split split = Split::Train, const SynthOptions& options = {});

/// Class-stratified random subset of size n (proportional allocation,
/// largest remainder), returned in seeded random order.
Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed);

}  // namespace semcom
