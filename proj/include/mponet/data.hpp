#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mponet/tensor.hpp"

namespace mponet {

/// Images normalized to [0,1] (raw bytes / 255) with integer labels 0..9.
struct DatasetSplit {
    Tensor images; // [count, H, W]
    std::vector<int> labels;

    std::size_t count() const { return labels.size(); }
};

// IDX container I/O: big-endian 32-bit header fields, unsigned-byte payload.
// Paths ending in .gz are decompressed transparently.
Tensor load_idx_images(const std::filesystem::path& path); // [N,H,W], raw 0..255
std::vector<int> load_idx_labels(const std::filesystem::path& path);
void save_idx_images(const std::filesystem::path& path, const Tensor& images);
void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels);

/// Loads an (images, labels) pair and normalizes pixels to [0,1].
DatasetSplit load_split(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path);

/// Standard MNIST file names under dir (train-images-idx3-ubyte etc.),
/// falling back to the .gz variants.
DatasetSplit load_mnist_split(const std::filesystem::path& dir, bool train);

struct Batch {
    Tensor images;           // [b, H, W]
    Tensor targets;          // [b, classes] one-hot
    std::vector<int> labels; // [b]
};

/// Deterministic shuffled partition of 0..count-1 for (seed, epoch); the
/// final short batch is kept.
std::vector<std::vector<std::size_t>> batch_order(std::size_t count,
                                                  std::size_t batch_size,
                                                  std::uint64_t seed,
                                                  std::size_t epoch);

Batch gather_batch(const DatasetSplit& split, std::span<const std::size_t> idx,
                   std::size_t num_classes = 10);

/// Rank bound for input truncation; 1 <= chi <= min(H, W).
struct TruncationSpec {
    std::size_t chi;
};

/// Best rank-chi approximation of one [H,W] image: keep the top chi singular
/// triplets of the image matrix.
Tensor rank_truncate(const Tensor& image, const TruncationSpec& spec);

/// Truncates every image of the split in place.
void rank_truncate_split(DatasetSplit& split, const TruncationSpec& spec);

} // namespace mponet
