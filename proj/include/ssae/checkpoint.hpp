#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssae/nn.hpp"

namespace ssae {

// Self-describing tensor container: magic + format version + JSON header
// (metadata and tensor table) + little-endian float32 blob with a CRC32.
struct TensorFile {
    nlohmann::json meta;
    std::vector<std::pair<std::string, std::vector<float>>> tensors;

    const std::vector<float>* find(const std::string& name) const;
};

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path);

nlohmann::json model_config_to_json(const nn::ModelConfig& cfg);
nn::ModelConfig model_config_from_json(const nlohmann::json& j);

// Weight checkpoints embed the ModelConfig; a load round-trips bit-identical
// parameters and running statistics.
void save_network(const std::filesystem::path& path, nn::Network& net);
std::unique_ptr<nn::Network> load_network(const std::filesystem::path& path,
                                          const std::optional<nn::ModelConfig>& expected = std::nullopt);

}  // namespace ssae
