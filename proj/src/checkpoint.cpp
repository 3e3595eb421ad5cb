#include "ssae/checkpoint.hpp"

#include <zlib.h>

#include <cstdio>
#include <cstring>
#include <memory>

namespace ssae {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'A', 'E', 'T', 'N', 'S', 'R'};
constexpr uint32_t kFormatVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

uint32_t blob_crc(const std::vector<std::vector<float> const*>& chunks) {
    uLong crc = crc32(0L, Z_NULL, 0);
    for (const auto* c : chunks)
        crc = crc32(crc, reinterpret_cast<const Bytef*>(c->data()),
                    static_cast<uInt>(c->size() * sizeof(float)));
    return static_cast<uint32_t>(crc);
}

}  // namespace

const std::vector<float>* TensorFile::find(const std::string& name) const {
    for (const auto& [n, data] : tensors)
        if (n == name) return &data;
    return nullptr;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
    nlohmann::json header = file.meta;
    header["format_version"] = kFormatVersion;
    nlohmann::json table = nlohmann::json::array();
    size_t offset = 0;
    std::vector<std::vector<float> const*> chunks;
    for (const auto& [name, data] : file.tensors) {
        table.push_back({{"name", name}, {"numel", data.size()}, {"offset", offset}});
        offset += data.size();
        chunks.push_back(&data);
    }
    header["tensors"] = table;
    header["crc32"] = blob_crc(chunks);
    const std::string json = header.dump();

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
    std::fwrite(kMagic, 1, 8, fp.get());
    const uint32_t ver = kFormatVersion;
    std::fwrite(&ver, 4, 1, fp.get());
    const uint64_t jlen = json.size();
    std::fwrite(&jlen, 8, 1, fp.get());
    std::fwrite(json.data(), 1, json.size(), fp.get());
    const uint64_t count = offset;
    std::fwrite(&count, 8, 1, fp.get());
    for (const auto& [name, data] : file.tensors)
        if (std::fwrite(data.data(), sizeof(float), data.size(), fp.get()) != data.size())
            throw std::runtime_error("short write to checkpoint: " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open checkpoint: " + path.string());
    char magic[8];
    if (std::fread(magic, 1, 8, fp.get()) != 8 || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("not a checkpoint file: " + path.string());
    uint32_t ver = 0;
    if (std::fread(&ver, 4, 1, fp.get()) != 1 || ver != kFormatVersion)
        throw std::runtime_error("unsupported checkpoint format version in " + path.string());
    uint64_t jlen = 0;
    if (std::fread(&jlen, 8, 1, fp.get()) != 1)
        throw std::runtime_error("truncated checkpoint header: " + path.string());
    std::string json(jlen, '\0');
    if (std::fread(json.data(), 1, jlen, fp.get()) != jlen)
        throw std::runtime_error("truncated checkpoint header: " + path.string());

    TensorFile file;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("corrupt checkpoint header: " + path.string());
    }

    uint64_t count = 0;
    if (std::fread(&count, 8, 1, fp.get()) != 1)
        throw std::runtime_error("truncated checkpoint: " + path.string());
    std::vector<float> blob(count);
    if (std::fread(blob.data(), sizeof(float), count, fp.get()) != count)
        throw std::runtime_error("truncated checkpoint payload: " + path.string());

    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(blob.data()),
                static_cast<uInt>(blob.size() * sizeof(float)));
    if (static_cast<uint32_t>(crc) != header.at("crc32").get<uint32_t>())
        throw std::runtime_error("checkpoint payload checksum mismatch: " + path.string());

    for (const auto& entry : header.at("tensors")) {
        const size_t numel = entry.at("numel").get<size_t>();
        const size_t offset = entry.at("offset").get<size_t>();
        if (offset + numel > blob.size())
            throw std::runtime_error("checkpoint tensor table out of range: " + path.string());
        file.tensors.emplace_back(
            entry.at("name").get<std::string>(),
            std::vector<float>(blob.begin() + offset, blob.begin() + offset + numel));
    }
    header.erase("tensors");
    header.erase("crc32");
    header.erase("format_version");
    file.meta = std::move(header);
    return file;
}

nlohmann::json model_config_to_json(const nn::ModelConfig& cfg) {
    return {{"input_side", cfg.input_side},
            {"base_width", cfg.base_width},
            {"dilations", cfg.dilations},
            {"sdc_stacks", cfg.sdc_stacks},
            {"width_scale", cfg.width_scale}};
}

nn::ModelConfig model_config_from_json(const nlohmann::json& j) {
    nn::ModelConfig cfg;
    cfg.input_side = j.at("input_side").get<int>();
    cfg.base_width = j.at("base_width").get<int>();
    cfg.dilations = j.at("dilations").get<std::vector<int>>();
    cfg.sdc_stacks = j.at("sdc_stacks").get<int>();
    cfg.width_scale = j.at("width_scale").get<double>();
    return cfg;
}

void save_network(const std::filesystem::path& path, nn::Network& net) {
    TensorFile file;
    file.meta["kind"] = "ssae-network";
    file.meta["model_config"] = model_config_to_json(net.config());
    for (const auto& p : net.params()) file.tensors.emplace_back(p.name, p.value->v);
    for (const auto& s : net.state()) file.tensors.emplace_back(s.name, s.value->v);
    write_tensor_file(path, file);
}

std::unique_ptr<nn::Network> load_network(const std::filesystem::path& path,
                                          const std::optional<nn::ModelConfig>& expected) {
    const TensorFile file = read_tensor_file(path);
    if (file.meta.value("kind", "") != "ssae-network")
        throw std::runtime_error("checkpoint does not contain a network: " + path.string());
    const nn::ModelConfig cfg = model_config_from_json(file.meta.at("model_config"));
    if (expected && !(cfg == *expected))
        throw std::runtime_error("checkpoint model config mismatch (e.g. input side " +
                                 std::to_string(cfg.input_side) + " vs expected " +
                                 std::to_string(expected->input_side) + "): " + path.string());
    auto net = std::make_unique<nn::Network>(cfg);
    auto fill = [&](const nn::ParamRef& ref) {
        const std::vector<float>* data = file.find(ref.name);
        if (!data) throw std::runtime_error("checkpoint missing tensor " + ref.name + ": " + path.string());
        if (data->size() != ref.value->size())
            throw std::runtime_error("checkpoint tensor size mismatch for " + ref.name + ": " +
                                     path.string());
        ref.value->v = *data;
    };
    for (const auto& p : net->params()) fill(p);
    for (const auto& s : net->state()) fill(s);
    return net;
}

}  // namespace ssae
