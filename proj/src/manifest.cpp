#include "splatgeo/manifest.hpp"

#include "splatgeo/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <memory>

namespace splatgeo {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct DigestContext {
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};
    DigestContext() {
        if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
            throw Error(ErrorCode::IoFailure, "cannot initialise SHA-256");
    }
    void update(const void* data, std::size_t n) { EVP_DigestUpdate(ctx.get(), data, n); }
    std::string finish() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        EVP_DigestFinal_ex(ctx.get(), md, &len);
        static const char* hex = "0123456789abcdef";
        std::string out;
        for (unsigned int i = 0; i < len; ++i) {
            out += hex[md[i] >> 4];
            out += hex[md[i] & 15];
        }
        return out;
    }
};

bool is_manifest(const fs::path& p) {
    const std::string name = p.filename().string();
    return name == "manifest.json" || name.ends_with(".manifest.json");
}

} // namespace

std::string sha256_hex(const void* data, std::size_t size) {
    DigestContext d;
    d.update(data, size);
    return d.finish();
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot read " + path.string());
    DigestContext d;
    std::array<char, 1 << 16> buf;
    while (in) {
        in.read(buf.data(), buf.size());
        d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return d.finish();
}

void hash_path(const fs::path& path, std::map<std::string, std::string>& out) {
    if (fs::is_directory(path)) {
        for (const auto& e : fs::recursive_directory_iterator(path))
            if (e.is_regular_file() && !is_manifest(e.path())) out[e.path().generic_string()] = sha256_file(e.path());
    } else if (fs::is_regular_file(path)) {
        out[path.generic_string()] = sha256_file(path);
    }
}

json RunManifest::to_json() const {
    json j;
    j["command"] = command;
    j["argv"] = argv;
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["results"] = results;
    j["wall_time_s"] = wall_time;
    j["version"] = version;
    j["seed"] = seed;
    j["exit_code"] = exit_code;
    j["error"] = error.empty() ? json(nullptr) : json(error);
    return j;
}

RunManifest RunManifest::from_json(const json& j) {
    try {
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.argv = j.at("argv").get<std::vector<std::string>>();
        m.config = j.at("config");
        m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
        m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
        m.results = j.value("results", json::object());
        m.wall_time = j.value("wall_time_s", 0.0);
        m.version = j.value("version", "");
        m.seed = j.value("seed", std::uint64_t{0});
        m.exit_code = j.value("exit_code", 0);
        if (j.contains("error") && j["error"].is_string()) m.error = j["error"].get<std::string>();
        return m;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, std::string("manifest: ") + e.what());
    }
}

void RunManifest::write(const fs::path& path) const {
    if (path.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

RunManifest RunManifest::read(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, path.string() + ": " + e.what());
    }
    return from_json(j);
}

} // namespace splatgeo
