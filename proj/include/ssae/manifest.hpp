#pragma once

#include <filesystem>
#include <map>
#include <string>

namespace ssae {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr int kConfigVersion = 1;

// One manifest per run directory; the stored args suffice to re-run the
// command identically (all randomness is reachable through them).
struct RunManifest {
    std::string command;
    std::map<std::string, std::string> args;       // resolved long-option values
    std::map<std::string, std::string> artifacts;  // outputs, relative to the run dir
};

void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& file);

}  // namespace ssae
