#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "semcom/data.hpp"

using namespace semcom;

namespace {

std::vector<std::uint8_t> random_records(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_int_distribution<int> byte(0, 255), label(0, 9);
    std::vector<std::uint8_t> bytes(n * kCifarRecord);
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        bytes[i] = static_cast<std::uint8_t>(i % kCifarRecord == 0 ? label(rng) : byte(rng));
    }
    return bytes;
}

// Nearest class mean accuracy on `test` with means estimated on `train`.
double nearest_mean_accuracy(const Dataset& train, const Dataset& test) {
    const auto d = train.images.row_size();
    std::vector<double> means(train.num_classes * d, 0.0);
    const auto counts = train.class_counts();
    for (std::size_t i = 0; i < train.size(); ++i) {
        const auto c = static_cast<std::size_t>(train.labels[i]);
        auto row = train.images.row(i);
        for (std::size_t p = 0; p < d; ++p) means[c * d + p] += row[p] / static_cast<double>(counts[c]);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto row = test.images.row(i);
        std::size_t best = 0;
        double best_dist = 1e300;
        for (std::size_t c = 0; c < train.num_classes; ++c) {
            double dist = 0.0;
            for (std::size_t p = 0; p < d; ++p) dist += (row[p] - means[c * d + p]) * (row[p] - means[c * d + p]);
            if (dist < best_dist) best_dist = dist, best = c;
        }
        correct += static_cast<std::size_t>(static_cast<int>(best) == test.labels[i]);
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST(Cifar, RoundTripIsByteExact) {
    const auto bytes = random_records(7, 1);
    const auto data = parse_cifar10(bytes);
    ASSERT_EQ(data.size(), 7u);
    EXPECT_EQ(data.images.shape(), (Shape{7, 32, 32, 3}));
    EXPECT_EQ(serialize_cifar10(data), bytes);
}

TEST(Cifar, ChannelPlanesMapToLastAxis) {
    std::vector<std::uint8_t> bytes(kCifarRecord, 0);
    bytes[0] = 3;
    bytes[1 + 0 * 1024 + 33] = 255;  // R at (1,1)
    bytes[1 + 2 * 1024 + 2] = 51;    // B at (0,2)
    const auto data = parse_cifar10(bytes);
    EXPECT_EQ(data.labels[0], 3);
    EXPECT_DOUBLE_EQ(data.images[(1 * 32 + 1) * 3 + 0], 1.0);
    EXPECT_DOUBLE_EQ(data.images[(0 * 32 + 2) * 3 + 2], 0.2);
    for (double v : data.images.values()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
}

TEST(Cifar, TruncatedFileReportsOffset) {
    auto bytes = random_records(3, 2);
    bytes.resize(bytes.size() - 10);
    try {
        parse_cifar10(bytes);
        FAIL() << "expected DataError";
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("offset " + std::to_string(2 * kCifarRecord)), std::string::npos) << e.what();
    }
}

TEST(Cifar, LabelAboveNineIsRejected) {
    auto bytes = random_records(2, 3);
    bytes[kCifarRecord] = 10;
    EXPECT_THROW(parse_cifar10(bytes), DataError);
}

TEST(Cifar, LoadsDirectoryOfBatches) {
    const auto dir = std::filesystem::temp_directory_path() / "semcom_cifar_test";
    std::filesystem::create_directories(dir);
    auto write = [&](const std::string& name, std::size_t n, std::uint64_t seed) {
        const auto bytes = random_records(n, seed);
        std::ofstream(dir / name, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                          static_cast<std::streamsize>(bytes.size()));
    };
    for (int i = 1; i <= 5; ++i) write("data_batch_" + std::to_string(i) + ".bin", 2, static_cast<std::uint64_t>(i));
    write("test_batch.bin", 3, 9);
    const auto [train, test] = load_cifar10(dir);
    EXPECT_EQ(train.size(), 10u);
    EXPECT_EQ(test.size(), 3u);
    EXPECT_EQ(test.split, Split::Test);
    std::filesystem::remove_all(dir);
    EXPECT_THROW(load_cifar10(dir), DataError);
}

TEST(Synth, DeterministicBalancedAndBounded) {
    SynthOptions opts;
    opts.image_shape = {8, 8, 3};
    const auto a = synth_dataset(200, 5, Split::Train, opts);
    const auto b = synth_dataset(200, 5, Split::Train, opts);
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.labels, b.labels);
    for (auto c : a.class_counts()) EXPECT_EQ(c, 20u);
    for (double v : a.images.values()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
    EXPECT_NE(synth_dataset(200, 5, Split::Test, opts).images, a.images);
}

TEST(Synth, NearestMeanOracleSeparatesClasses) {
    SynthOptions opts;
    opts.image_shape = {8, 8, 3};
    const auto train = synth_dataset(2000, 7, Split::Train, opts);
    const auto test = synth_dataset(1000, 7, Split::Test, opts);
    EXPECT_GT(nearest_mean_accuracy(train, test), 0.95);
}

TEST(Subset, StratifiedAndSeeded) {
    SynthOptions opts;
    opts.image_shape = {4, 4, 1};
    const auto data = synth_dataset(100, 1, Split::Train, opts);
    const auto s = subset(data, 30, 4);
    for (auto c : s.class_counts()) EXPECT_EQ(c, 3u);
    EXPECT_EQ(subset(data, 30, 4).labels, s.labels);
    EXPECT_THROW(subset(data, 101, 4), std::invalid_argument);
}

TEST(Subset, FullSizeIsPermutation) {
    SynthOptions opts;
    opts.image_shape = {2, 2, 1};
    const auto data = synth_dataset(50, 2, Split::Train, opts);
    const auto s = subset(data, 50, 8);
    auto rows = [](const Dataset& d) {
        std::multiset<std::vector<double>> out;
        for (std::size_t i = 0; i < d.size(); ++i) {
            auto r = d.images.row(i);
            std::vector<double> v(r.begin(), r.end());
            v.push_back(d.labels[i]);
            out.insert(v);
        }
        return out;
    };
    EXPECT_EQ(rows(s), rows(data));
}
