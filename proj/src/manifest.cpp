#include "nvmri/manifest.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include "nvmri/errors.hpp"

namespace nvmri {

namespace {

std::string hex(const unsigned char* d, unsigned n) {
    static const char* digits = "0123456789abcdef";
    std::string s(2 * n, '0');
    for (unsigned i = 0; i < n; ++i) {
        s[2 * i] = digits[d[i] >> 4];
        s[2 * i + 1] = digits[d[i] & 15];
    }
    return s;
}

struct CtxDeleter {
    void operator()(EVP_MD_CTX* c) const { EVP_MD_CTX_free(c); }
};

}  // namespace

std::string sha256File(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot read " + path);
    std::unique_ptr<EVP_MD_CTX, CtxDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
        throw NumericalError("SHA-256 initialisation failed");
    char buf[1 << 16];
    while (f) {
        f.read(buf, sizeof buf);
        const auto n = f.gcount();
        if (n > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(n));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    return hex(md, len);
}

std::string sha256String(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    return hex(md, len);
}

ManifestEntry hashEntry(const std::string& dir, const std::string& relPath) {
    const auto full = std::filesystem::path(dir) / relPath;
    return {relPath, sha256File(full.string()), std::filesystem::file_size(full)};
}

namespace {

nlohmann::ordered_json entriesJson(const std::vector<ManifestEntry>& v) {
    auto a = nlohmann::ordered_json::array();
    for (const auto& e : v) a.push_back({{"path", e.path}, {"sha256", e.sha256}, {"bytes", e.bytes}});
    return a;
}

std::vector<ManifestEntry> entriesFrom(const nlohmann::ordered_json& a) {
    std::vector<ManifestEntry> v;
    for (const auto& e : a)
        v.push_back({e.at("path").get<std::string>(), e.at("sha256").get<std::string>(),
                     e.at("bytes").get<std::uintmax_t>()});
    return v;
}

}  // namespace

void writeManifest(const std::string& dir, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["artifact"] = "nvmri";
    j["version"] = kArtifactVersion;
    j["command"] = m.command;
    j["seed"] = m.seed;
    j["workers"] = m.workers;
    j["wall_clock_s"] = m.wallSeconds;
    j["config"] = m.config;
    j["inputs"] = entriesJson(m.inputs);
    j["outputs"] = entriesJson(m.outputs);
    std::ofstream f(std::filesystem::path(dir) / "manifest.json");
    if (!f) throw InvalidArgument("cannot write manifest in " + dir);
    f << j.dump(2) << "\n";
}

RunManifest readManifest(const std::string& dir) {
    const auto path = std::filesystem::path(dir) / "manifest.json";
    std::ifstream f(path);
    if (!f) throw InvalidArgument("no manifest.json in " + dir);
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(f);
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.seed = j.at("seed").get<std::uint64_t>();
        m.workers = j.at("workers").get<int>();
        m.wallSeconds = j.at("wall_clock_s").get<double>();
        m.inputs = entriesFrom(j.at("inputs"));
        m.outputs = entriesFrom(j.at("outputs"));
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(path.string() + ": malformed manifest: " + e.what());
    }
}

DriftReport compareEntries(const std::vector<ManifestEntry>& expected, const std::string& dir) {
    DriftReport r;
    for (const auto& e : expected) {
        const auto full = std::filesystem::path(dir) / e.path;
        if (!std::filesystem::exists(full)) {
            r.missing.push_back(e.path);
            continue;
        }
        if (sha256File(full.string()) != e.sha256) r.changed.push_back(e.path);
    }
    return r;
}

DriftReport compareOutputs(const std::vector<ManifestEntry>& expected, const std::vector<ManifestEntry>& actual) {
    DriftReport r;
    std::map<std::string, std::string> got;
    for (const auto& a : actual) got[a.path] = a.sha256;
    for (const auto& e : expected) {
        auto it = got.find(e.path);
        if (it == got.end()) r.missing.push_back(e.path);
        else {
            if (it->second != e.sha256) r.changed.push_back(e.path);
            got.erase(it);
        }
    }
    for (const auto& [p, h] : got) r.extra.push_back(p);
    return r;
}

}  // namespace nvmri
