#include "semcom/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>

#include "semcom/random.hpp"

namespace semcom {

std::string_view to_string(Split split) { return split == Split::Train ? "train" : "test"; }

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(num_classes, 0);
    for (int l : labels) ++counts.at(static_cast<std::size_t>(l));
    return counts;
}

void Dataset::validate() const {
    if (images.rank() == 0 || images.dim(0) != labels.size()) {
        throw std::invalid_argument("dataset has " + std::to_string(labels.size()) + " labels for images " +
                                    shape_string(images.shape()));
    }
    for (int l : labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= num_classes) {
            throw std::invalid_argument("label " + std::to_string(l) + " outside [0," + std::to_string(num_classes - 1) + "]");
        }
    }
}

Dataset slice(const Dataset& data, std::size_t begin, std::size_t end) {
    Dataset out;
    out.images = slice_rows(data.images, begin, end);
    out.labels.assign(data.labels.begin() + static_cast<std::ptrdiff_t>(begin),
                      data.labels.begin() + static_cast<std::ptrdiff_t>(end));
    out.split = data.split;
    out.num_classes = data.num_classes;
    return out;
}

Dataset parse_cifar10(std::span<const std::uint8_t> bytes, Split split) {
    if (bytes.size() % kCifarRecord != 0) {
        const auto tail = bytes.size() - bytes.size() % kCifarRecord;
        throw DataError("corrupt CIFAR-10 data: " + std::to_string(bytes.size()) + " bytes is not a multiple of " +
                        std::to_string(kCifarRecord) + "; truncated record at offset " + std::to_string(tail));
    }
    const auto n = bytes.size() / kCifarRecord;
    Dataset out;
    out.split = split;
    out.images = Tensor({n, kCifarSide, kCifarSide, 3});
    out.labels.resize(n);
    constexpr std::size_t plane = kCifarSide * kCifarSide;
    for (std::size_t i = 0; i < n; ++i) {
        const auto* rec = bytes.data() + i * kCifarRecord;
        if (rec[0] > 9) {
            throw DataError("record " + std::to_string(i) + " at offset " + std::to_string(i * kCifarRecord) +
                            " has label byte " + std::to_string(rec[0]));
        }
        out.labels[i] = rec[0];
        double* img = out.images.data() + i * kCifarPixels;
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t p = 0; p < plane; ++p) img[p * 3 + c] = rec[1 + c * plane + p] / 255.0;
        }
    }
    return out;
}

std::vector<std::uint8_t> serialize_cifar10(const Dataset& data) {
    if (data.image_shape() != Shape{kCifarSide, kCifarSide, 3}) {
        throw DataError("CIFAR-10 records hold 32x32x3 images, got " + shape_string(data.image_shape()));
    }
    constexpr std::size_t plane = kCifarSide * kCifarSide;
    std::vector<std::uint8_t> bytes(data.size() * kCifarRecord);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto* rec = bytes.data() + i * kCifarRecord;
        rec[0] = static_cast<std::uint8_t>(data.labels[i]);
        const double* img = data.images.data() + i * kCifarPixels;
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t p = 0; p < plane; ++p) {
                rec[1 + c * plane + p] = static_cast<std::uint8_t>(std::lround(std::clamp(img[p * 3 + c], 0.0, 1.0) * 255.0));
            }
        }
    }
    return bytes;
}

Dataset load_cifar10_file(const std::filesystem::path& path, Split split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return parse_cifar10(bytes, split);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

namespace {

Dataset concat(std::vector<Dataset> parts) {
    std::size_t n = 0;
    for (const auto& p : parts) n += p.size();
    Dataset out;
    out.split = parts.front().split;
    Shape shape{n};
    const auto img = parts.front().image_shape();
    shape.insert(shape.end(), img.begin(), img.end());
    out.images = Tensor(shape);
    std::size_t offset = 0;
    for (const auto& p : parts) {
        std::copy(p.images.data(), p.images.data() + p.images.size(), out.images.data() + offset);
        offset += p.images.size();
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

}  // namespace

std::pair<Dataset, Dataset> load_cifar10(const std::filesystem::path& directory) {
    std::vector<Dataset> train;
    for (int i = 1; i <= 5; ++i) {
        train.push_back(load_cifar10_file(directory / ("data_batch_" + std::to_string(i) + ".bin"), Split::Train));
    }
    return {concat(std::move(train)), load_cifar10_file(directory / "test_batch.bin", Split::Test)};
}

namespace {

std::vector<double> blob_means(std::uint64_t seed, const SynthOptions& options) {
    const auto& shape = options.image_shape;
    if (shape.size() != 3) throw std::invalid_argument("synthetic images need an (H, W, C) shape");
    const auto h = shape[0], w = shape[1], c = shape[2];
    const double width = std::max(options.blob_width * static_cast<double>(std::min(h, w)), 0.5);
    Rng rng(derive_seed(seed, "synth-means"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> amp(-options.amplitude, options.amplitude);
    std::vector<double> means(options.classes * h * w * c, 0.5);
    for (std::size_t k = 0; k < options.classes; ++k) {
        double* img = means.data() + k * h * w * c;
        for (std::size_t b = 0; b < options.blobs; ++b) {
            const double cy = unit(rng) * static_cast<double>(h - 1);
            const double cx = unit(rng) * static_cast<double>(w - 1);
            std::vector<double> color(c);
            for (auto& a : color) a = amp(rng);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double dy = static_cast<double>(y) - cy, dx = static_cast<double>(x) - cx;
                    const double bump = std::exp(-(dy * dy + dx * dx) / (2.0 * width * width));
                    for (std::size_t ch = 0; ch < c; ++ch) img[(y * w + x) * c + ch] += color[ch] * bump;
                }
            }
        }
    }
    return means;
}

}  // namespace

Dataset synth_dataset(std::size_t n, std::uint64_t seed, Split split, const SynthOptions& options) {
    if (options.classes == 0) throw std::invalid_argument("synthetic dataset needs at least one class");
    const auto pixels = shape_size(options.image_shape);
    const auto means = blob_means(seed, options);

    Rng rng(derive_seed(seed, to_string(split)));
    std::normal_distribution<double> noise(0.0, options.noise_std);
    Dataset out;
    out.split = split;
    out.num_classes = options.classes;
    Shape shape{n};
    shape.insert(shape.end(), options.image_shape.begin(), options.image_shape.end());
    out.images = Tensor(shape);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = i % options.classes;
        out.labels[i] = static_cast<int>(c);
        double* img = out.images.data() + i * pixels;
        for (std::size_t p = 0; p < pixels; ++p) img[p] = std::clamp(means[c * pixels + p] + noise(rng), 0.0, 1.0);
    }
    return out;
}

Dataset subset(const Dataset& data, std::size_t n, std::uint64_t seed) {
    if (n > data.size()) {
        throw std::invalid_argument("subset of " + std::to_string(n) + " requested from " + std::to_string(data.size()) +
                                    " samples");
    }
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> by_class(data.num_classes);
    for (std::size_t i = 0; i < data.size(); ++i) by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);

    // Largest-remainder allocation of n across classes.
    std::vector<std::size_t> take(data.num_classes);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < data.num_classes; ++c) {
        const double exact = static_cast<double>(n) * static_cast<double>(by_class[c].size()) / static_cast<double>(data.size());
        take[c] = static_cast<std::size_t>(std::floor(exact));
        assigned += take[c];
        remainders.emplace_back(-(exact - std::floor(exact)), c);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++take[remainders[k % remainders.size()].second];

    std::vector<std::size_t> chosen;
    for (std::size_t c = 0; c < data.num_classes; ++c) {
        auto idx = by_class[c];
        std::shuffle(idx.begin(), idx.end(), rng);
        chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take[c]));
    }
    std::shuffle(chosen.begin(), chosen.end(), rng);

    Dataset out;
    out.images = gather_rows(data.images, chosen);
    out.labels.reserve(n);
    for (auto i : chosen) out.labels.push_back(data.labels[i]);
    out.split = data.split;
    out.num_classes = data.num_classes;
    return out;
}

}  // namespace semcom
