#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace splatgeo {

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);

// Hashes a file, or every regular file below a directory (keys are the
// generic paths). Manifest files themselves are skipped.
void hash_path(const std::filesystem::path& path, std::map<std::string, std::string>& out);

struct RunManifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config = nlohmann::json::object();
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    nlohmann::json results = nlohmann::json::object();
    double wall_time = 0.0;
    std::string version;
    std::uint64_t seed = 0;
    int exit_code = 0;
    std::string error; // empty on success

    nlohmann::json to_json() const;
    static RunManifest from_json(const nlohmann::json& j);
    void write(const std::filesystem::path& path) const;
    static RunManifest read(const std::filesystem::path& path);
};

} // namespace splatgeo
