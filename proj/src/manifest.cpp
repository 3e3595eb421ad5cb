#include "ssae/manifest.hpp"

#include <chrono>
#include <fstream>

#include <json.hpp>

namespace ssae {

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));

    nlohmann::json j = {{"tool", "ssae"},
                        {"version", kToolVersion},
                        {"config_version", kConfigVersion},
                        {"command", manifest.command},
                        {"created_utc", stamp},
                        {"args", manifest.args},
                        {"artifacts", manifest.artifacts}};
    std::filesystem::create_directories(dir);
    std::ofstream out(dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot read manifest: " + file.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest " + file.string() + ": " + e.what());
    }
    if (j.value("tool", "") != "ssae")
        throw std::runtime_error("not an ssae manifest: " + file.string());
    if (j.value("config_version", 0) != kConfigVersion)
        throw std::runtime_error("unsupported manifest config_version in " + file.string());
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    for (const auto& [k, v] : j.at("args").items()) m.args[k] = v.get<std::string>();
    if (j.contains("artifacts"))
        for (const auto& [k, v] : j.at("artifacts").items()) m.artifacts[k] = v.get<std::string>();
    return m;
}

}  // namespace ssae
