#include "mponet/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace mponet {

static_assert(std::endian::native == std::endian::little,
              "model archives are defined little-endian");

namespace {

constexpr char kMagic[8] = {'M', 'P', 'O', 'N', 'E', 'T', '0', '1'};
const char* kStructuralKeys[] = {"format",  "version",       "architecture",
                                 "tensors", "payload_bytes", "payload_crc32"};

struct TensorEntry {
    std::string name;
    const Tensor* tensor;
};

// Architecture entry plus the ordered parameter tensors of one layer.
nlohmann::json describe_layer(const Layer& layer, std::size_t index,
                              std::vector<TensorEntry>& entries)
{
    const std::string prefix = "layer" + std::to_string(index) + ".";
    nlohmann::json j;
    j["kind"] = layer.kind();
    if (const auto* d = dynamic_cast<const DenseLinear*>(&layer)) {
        j["in"] = d->in_dim();
        j["out"] = d->out_dim();
        entries.push_back({prefix + "weight", &d->weight()});
        entries.push_back({prefix + "bias", &d->bias()});
    } else if (const auto* m = dynamic_cast<const MpoLinear*>(&layer)) {
        const MpoStructure& s = m->mpo().structure;
        j["J"] = s.J;
        j["I"] = s.I;
        j["D"] = s.D;
        for (std::size_t k = 0; k < s.n(); ++k)
            entries.push_back({prefix + "core" + std::to_string(k), &m->mpo().cores[k]});
        entries.push_back({prefix + "bias", &m->mpo().bias});
    } else if (const auto* c = dynamic_cast<const Conv2D*>(&layer)) {
        j["out_channels"] = c->kernels().shape()[0];
        j["in_channels"] = c->kernels().shape()[1];
        j["kh"] = c->kernels().shape()[2];
        j["kw"] = c->kernels().shape()[3];
        j["stride"] = c->stride();
        j["padding"] = c->padding() == Padding::same ? "same" : "none";
        entries.push_back({prefix + "kernels", &c->kernels()});
        entries.push_back({prefix + "bias", &c->bias()});
    } else if (const auto* p = dynamic_cast<const MaxPool*>(&layer)) {
        j["kh"] = p->kh();
        j["kw"] = p->kw();
        j["stride"] = p->stride();
    }
    // relu / softmax carry only their kind
    return j;
}

std::unique_ptr<Layer> build_layer(const nlohmann::json& j, std::vector<Tensor>& params,
                                   std::size_t& next)
{
    const std::string kind = j.at("kind").get<std::string>();
    auto take = [&]() -> Tensor {
        if (next >= params.size())
            throw FormatError("model archive: tensor list too short");
        return std::move(params[next++]);
    };
    if (kind == "dense_linear") {
        Tensor w = take(), b = take();
        return std::make_unique<DenseLinear>(std::move(w), std::move(b));
    }
    if (kind == "mpo_linear") {
        MpoStructure s;
        s.J = j.at("J").get<std::vector<std::size_t>>();
        s.I = j.at("I").get<std::vector<std::size_t>>();
        s.D = j.at("D").get<std::vector<std::size_t>>();
        std::vector<Tensor> cores;
        for (std::size_t k = 0; k < s.n(); ++k)
            cores.push_back(take());
        Tensor bias = take();
        return std::make_unique<MpoLinear>(
            MpoLayer::make(std::move(s), std::move(cores), std::move(bias)));
    }
    if (kind == "conv2d") {
        Tensor k = take(), b = take();
        return std::make_unique<Conv2D>(std::move(k), std::move(b),
                                        j.at("stride").get<std::size_t>(),
                                        j.at("padding").get<std::string>() == "same"
                                            ? Padding::same
                                            : Padding::none);
    }
    if (kind == "maxpool")
        return std::make_unique<MaxPool>(j.at("kh").get<std::size_t>(),
                                         j.at("kw").get<std::size_t>(),
                                         j.at("stride").get<std::size_t>());
    if (kind == "relu")
        return std::make_unique<ReLU>();
    if (kind == "softmax")
        return std::make_unique<Softmax>();
    throw FormatError("model archive: unknown layer kind '" + kind + "'");
}

} // namespace

void save_model(const std::filesystem::path& path, const Network& net,
                const nlohmann::json& extra)
{
    nlohmann::json manifest;
    manifest["format"] = "mponet-model";
    manifest["version"] = 1;

    std::vector<TensorEntry> entries;
    nlohmann::json arch = nlohmann::json::array();
    for (std::size_t i = 0; i < net.depth(); ++i)
        arch.push_back(describe_layer(net.layer(i), i, entries));
    manifest["architecture"] = std::move(arch);

    nlohmann::json tensors = nlohmann::json::array();
    std::size_t payload_bytes = 0;
    for (const auto& e : entries) {
        tensors.push_back({{"name", e.name}, {"shape", e.tensor->shape()}});
        payload_bytes += e.tensor->size() * sizeof(double);
    }
    manifest["tensors"] = std::move(tensors);
    manifest["payload_bytes"] = payload_bytes;

    uLong crc = crc32(0L, Z_NULL, 0);
    for (const auto& e : entries)
        crc = crc32(crc,
                    reinterpret_cast<const Bytef*>(e.tensor->data().data()),
                    static_cast<uInt>(e.tensor->size() * sizeof(double)));
    manifest["payload_crc32"] = static_cast<std::uint32_t>(crc);

    for (auto it = extra.begin(); it != extra.end(); ++it)
        manifest[it.key()] = it.value();

    const std::string text = manifest.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot create " + path.string());
    f.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(text.size());
    f.write(reinterpret_cast<const char*>(&len), 4);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& e : entries)
        f.write(reinterpret_cast<const char*>(e.tensor->data().data()),
                static_cast<std::streamsize>(e.tensor->size() * sizeof(double)));
    if (!f)
        throw FormatError("failed writing " + path.string());
}

LoadedModel load_model(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw FormatError("cannot open " + path.string());
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, kMagic, 8) != 0)
        throw FormatError(path.string() + ": not a model archive");
    std::uint32_t len = 0;
    f.read(reinterpret_cast<char*>(&len), 4);
    std::string text(len, '\0');
    f.read(text.data(), len);
    if (!f)
        throw FormatError(path.string() + ": truncated manifest");

    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(path.string() + ": bad manifest: " + e.what());
    }
    if (manifest.value("format", "") != "mponet-model")
        throw FormatError(path.string() + ": unexpected manifest format");

    std::vector<Tensor> params;
    std::size_t payload_bytes = 0;
    for (const auto& t : manifest.at("tensors")) {
        const auto shape = t.at("shape").get<std::vector<std::size_t>>();
        Tensor tensor(shape);
        payload_bytes += tensor.size() * sizeof(double);
        params.push_back(std::move(tensor));
    }
    if (manifest.at("payload_bytes").get<std::size_t>() != payload_bytes)
        throw FormatError(path.string() + ": inconsistent payload size in manifest");

    uLong crc = crc32(0L, Z_NULL, 0);
    for (Tensor& t : params) {
        f.read(reinterpret_cast<char*>(t.data().data()),
               static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!f)
            throw FormatError(path.string() + ": truncated payload");
        crc = crc32(crc, reinterpret_cast<const Bytef*>(t.data().data()),
                    static_cast<uInt>(t.size() * sizeof(double)));
    }
    f.peek();
    if (!f.eof())
        throw FormatError(path.string() + ": trailing bytes after payload");
    if (static_cast<std::uint32_t>(crc) !=
        manifest.at("payload_crc32").get<std::uint32_t>())
        throw FormatError(path.string() + ": payload checksum mismatch");

    LoadedModel out;
    out.manifest = manifest;
    out.extra = manifest;
    for (const char* key : kStructuralKeys)
        out.extra.erase(key);

    std::size_t next = 0;
    for (const auto& lj : manifest.at("architecture"))
        out.network.add(build_layer(lj, params, next));
    if (next != params.size())
        throw FormatError(path.string() + ": unused tensors in archive");
    return out;
}

} // namespace mponet
