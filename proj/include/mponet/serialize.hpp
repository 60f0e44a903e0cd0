#pragma once

#include <filesystem>

#include <json.hpp>

#include "mponet/network.hpp"

namespace mponet {

/// Model archive: 8-byte magic "MPONET01", little-endian u32 manifest
/// length, JSON manifest, then the tensor payload as raw little-endian
/// float64 arrays in manifest order. The manifest carries a CRC32 of the
/// payload; save -> load -> save is byte-identical.
void save_model(const std::filesystem::path& path, const Network& net,
                const nlohmann::json& extra = nlohmann::json::object());

struct LoadedModel {
    Network network;
    nlohmann::json manifest;
    nlohmann::json extra; // manifest fields beyond the structural ones
};

LoadedModel load_model(const std::filesystem::path& path);

} // namespace mponet
