#include "mponet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include <zlib.h>

namespace mponet {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::vector<unsigned char> gunzip(const std::vector<unsigned char>& in,
                                  const std::string& name)
{
    z_stream zs{};
    if (inflateInit2(&zs, 15 + 16) != Z_OK)
        throw FormatError(name + ": failed to initialize gzip decoder");
    std::vector<unsigned char> out;
    out.reserve(in.size() * 4);
    unsigned char buf[1 << 16];
    zs.next_in = const_cast<unsigned char*>(in.data());
    zs.avail_in = static_cast<uInt>(in.size());
    int rc = Z_OK;
    do {
        zs.next_out = buf;
        zs.avail_out = sizeof(buf);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            inflateEnd(&zs);
            throw FormatError(name + ": corrupt gzip stream");
        }
        out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
    } while (rc != Z_STREAM_END);
    inflateEnd(&zs);
    return out;
}

std::vector<unsigned char> read_bytes(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    if (path.extension() == ".gz")
        return gunzip(bytes, path.string());
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t off,
                        const std::string& name)
{
    if (off + 4 > b.size())
        throw FormatError(name + ": truncated header");
    return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
           (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

void write_be32(std::ofstream& f, std::uint32_t v)
{
    const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                                static_cast<unsigned char>(v >> 16),
                                static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

} // namespace

Tensor load_idx_images(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    const std::string name = path.string();
    const std::uint32_t magic = read_be32(bytes, 0, name);
    if (magic != kImagesMagic)
        throw FormatError(name + ": bad magic " + std::to_string(magic) +
                          " for an IDX image file (want 2051)");
    const std::size_t count = read_be32(bytes, 4, name);
    const std::size_t rows = read_be32(bytes, 8, name);
    const std::size_t cols = read_be32(bytes, 12, name);
    const std::size_t expect = 16 + count * rows * cols;
    if (bytes.size() != expect)
        throw FormatError(name + ": payload has " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(expect));

    Tensor images({count, rows, cols});
    for (std::size_t i = 0; i < count * rows * cols; ++i)
        images[i] = static_cast<double>(bytes[16 + i]);
    return images;
}

std::vector<int> load_idx_labels(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    const std::string name = path.string();
    const std::uint32_t magic = read_be32(bytes, 0, name);
    if (magic != kLabelsMagic)
        throw FormatError(name + ": bad magic " + std::to_string(magic) +
                          " for an IDX label file (want 2049)");
    const std::size_t count = read_be32(bytes, 4, name);
    if (bytes.size() != 8 + count)
        throw FormatError(name + ": payload has " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(8 + count));
    std::vector<int> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
        const unsigned char v = bytes[8 + i];
        if (v > 9)
            throw FormatError(name + ": label byte " + std::to_string(int(v)) +
                              " out of range 0..9 at index " + std::to_string(i));
        labels[i] = v;
    }
    return labels;
}

void save_idx_images(const std::filesystem::path& path, const Tensor& images)
{
    if (images.rank() != 3)
        throw UsageError("save_idx_images expects a [count, rows, cols] tensor");
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot create " + path.string());
    write_be32(f, kImagesMagic);
    write_be32(f, static_cast<std::uint32_t>(images.shape()[0]));
    write_be32(f, static_cast<std::uint32_t>(images.shape()[1]));
    write_be32(f, static_cast<std::uint32_t>(images.shape()[2]));
    std::vector<unsigned char> bytes(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        const double v = std::clamp(images[i], 0.0, 255.0);
        bytes[i] = static_cast<unsigned char>(std::llround(v));
    }
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

void save_idx_labels(const std::filesystem::path& path, std::span<const int> labels)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot create " + path.string());
    write_be32(f, kLabelsMagic);
    write_be32(f, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        if (l < 0 || l > 9)
            throw UsageError("label out of range 0..9");
        const unsigned char b = static_cast<unsigned char>(l);
        f.write(reinterpret_cast<const char*>(&b), 1);
    }
}

DatasetSplit load_split(const std::filesystem::path& images_path,
                        const std::filesystem::path& labels_path)
{
    DatasetSplit split;
    split.images = load_idx_images(images_path);
    split.labels = load_idx_labels(labels_path);
    if (split.images.shape()[0] != split.labels.size())
        throw FormatError("image count " + std::to_string(split.images.shape()[0]) +
                          " does not match label count " +
                          std::to_string(split.labels.size()));
    for (double& v : split.images.data())
        v /= 255.0;
    return split;
}

DatasetSplit load_mnist_split(const std::filesystem::path& dir, bool train)
{
    const std::string stem_images =
        train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    const std::string stem_labels =
        train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    auto pick = [&](const std::string& stem) {
        const auto plain = dir / stem;
        if (std::filesystem::exists(plain))
            return plain;
        const auto gz = dir / (stem + ".gz");
        if (std::filesystem::exists(gz))
            return gz;
        throw FormatError("missing " + plain.string() + " (or .gz)");
    };
    return load_split(pick(stem_images), pick(stem_labels));
}

std::vector<std::vector<std::size_t>> batch_order(std::size_t count,
                                                  std::size_t batch_size,
                                                  std::uint64_t seed, std::size_t epoch)
{
    if (batch_size == 0)
        throw UsageError("batch size must be >= 1");
    std::vector<std::size_t> idx(count);
    for (std::size_t i = 0; i < count; ++i)
        idx[i] = i;
    std::seed_seq sseq{static_cast<std::uint32_t>(seed),
                       static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(epoch),
                       static_cast<std::uint32_t>(epoch >> 32)};
    std::mt19937_64 rng(sseq);
    std::shuffle(idx.begin(), idx.end(), rng);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t at = 0; at < count; at += batch_size) {
        const std::size_t take = std::min(batch_size, count - at);
        batches.emplace_back(idx.begin() + at, idx.begin() + at + take);
    }
    return batches;
}

Batch gather_batch(const DatasetSplit& split, std::span<const std::size_t> idx,
                   std::size_t num_classes)
{
    if (idx.empty())
        throw UsageError("gather_batch: empty index list");
    const std::size_t h = split.images.shape()[1], w = split.images.shape()[2];
    Batch batch;
    batch.images = Tensor({idx.size(), h, w});
    batch.targets = Tensor({idx.size(), num_classes});
    batch.labels.resize(idx.size());
    const double* src = split.images.data().data();
    double* dst = batch.images.data().data();
    for (std::size_t r = 0; r < idx.size(); ++r) {
        std::memcpy(dst + r * h * w, src + idx[r] * h * w, h * w * sizeof(double));
        const int label = split.labels[idx[r]];
        batch.labels[r] = label;
        batch.targets[r * num_classes + static_cast<std::size_t>(label)] = 1.0;
    }
    return batch;
}

Tensor rank_truncate(const Tensor& image, const TruncationSpec& spec)
{
    if (image.rank() != 2)
        throw UsageError("rank_truncate expects a [H, W] image");
    const std::size_t rmax = std::min(image.shape()[0], image.shape()[1]);
    if (spec.chi < 1 || spec.chi > rmax)
        throw UsageError("chi must lie in [1, " + std::to_string(rmax) + "]");
    SvdResult f = svd(image);
    return svd_reconstruct(f, spec.chi);
}

void rank_truncate_split(DatasetSplit& split, const TruncationSpec& spec)
{
    const std::size_t n = split.images.shape()[0];
    const std::size_t h = split.images.shape()[1], w = split.images.shape()[2];
    for (std::size_t i = 0; i < n; ++i) {
        Tensor img({h, w});
        std::memcpy(img.data().data(), split.images.data().data() + i * h * w,
                    h * w * sizeof(double));
        Tensor t = rank_truncate(img, spec);
        std::memcpy(split.images.data().data() + i * h * w, t.data().data(),
                    h * w * sizeof(double));
    }
}

} // namespace mponet
