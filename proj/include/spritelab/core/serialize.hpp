#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spritelab/ad/graph.hpp"
#include "spritelab/core/error.hpp"
#include "spritelab/core/tensor.hpp"

namespace spritelab {

namespace fs = std::filesystem;
using json = nlohmann::json;

inline uint64_t fnv1a64(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const uint8_t*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

// Raw little-endian float32 blobs. This code assumes a little-endian host.
inline void write_f32(const fs::path& path, const float* data, size_t n) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write " + path.string());
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(float)));
}

inline void write_f32(const fs::path& path, const Tensor& t) {
    write_f32(path, t.data(), static_cast<size_t>(t.numel()));
}

inline std::vector<float> read_f32(const fs::path& path, size_t expect = 0) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw DataError("cannot read " + path.string());
    const auto bytes = static_cast<size_t>(f.tellg());
    if (bytes % sizeof(float) != 0) throw DataError("not a float32 blob: " + path.string());
    std::vector<float> out(bytes / sizeof(float));
    f.seekg(0);
    f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
    if (expect && out.size() != expect)
        throw DataError("size mismatch in " + path.string() + ": got " +
                        std::to_string(out.size()) + " want " + std::to_string(expect));
    return out;
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    if (!f) throw DataError("cannot write " + path.string());
    f << j.dump(2) << "\n";
}

inline json read_json(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot read " + path.string());
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw DataError("bad json in " + path.string() + ": " + e.what());
    }
    return j;
}

// Checkpoint = manifest.json (config, parameter names/shapes/offsets) +
// params.bin (concatenated little-endian float32 blobs).
inline void save_params(const fs::path& dir, const ad::ParamStore& params, const json& config) {
    fs::create_directories(dir);
    json manifest;
    manifest["format"] = "spritelab-checkpoint-v1";
    manifest["config"] = config;
    json plist = json::array();
    std::vector<float> blob;
    for (const ad::Param* p : params.all()) {
        json e;
        e["name"] = p->name;
        e["shape"] = p->value.shape();
        e["offset"] = blob.size();
        e["numel"] = p->value.numel();
        plist.push_back(e);
        blob.insert(blob.end(), p->value.data(), p->value.data() + p->value.numel());
    }
    manifest["params"] = plist;
    manifest["blob_hash"] = hex64(fnv1a64(blob.data(), blob.size() * sizeof(float)));
    write_f32(dir / "params.bin", blob.data(), blob.size());
    write_json(dir / "manifest.json", manifest);
}

inline json load_params(const fs::path& dir, ad::ParamStore& params) {
    const json manifest = read_json(dir / "manifest.json");
    const auto blob = read_f32(dir / "params.bin");
    for (const auto& e : manifest.at("params")) {
        const std::string name = e.at("name");
        if (!params.has(name)) throw DataError("checkpoint param not in model: " + name);
        ad::Param& p = params.get(name);
        const size_t off = e.at("offset");
        const size_t n = e.at("numel");
        if (p.value.numel() != static_cast<int64_t>(n))
            throw DataError("checkpoint shape mismatch for " + name);
        std::copy_n(blob.data() + off, n, p.value.data());
    }
    return manifest.at("config");
}

inline uint64_t params_hash(const ad::ParamStore& params,
                            const std::vector<std::string>& only = {}) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const ad::Param* p : params.all()) {
        if (!only.empty()) {
            bool match = false;
            for (const auto& prefix : only)
                if (p->name.rfind(prefix, 0) == 0) match = true;
            if (!match) continue;
        }
        h = fnv1a64(p->name.data(), p->name.size(), h);
        h = fnv1a64(p->value.data(), static_cast<size_t>(p->value.numel()) * sizeof(float), h);
    }
    return h;
}

inline uint64_t file_hash(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read " + path.string());
    uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof(buf));
        h = fnv1a64(buf, static_cast<size_t>(f.gcount()), h);
    }
    return h;
}

}  // namespace spritelab
