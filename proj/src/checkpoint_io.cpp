#include "codegaze/checkpoint_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace codegaze::ckpt {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian; big-endian hosts are unsupported");

namespace {
constexpr char kMagic[8] = {'C', 'G', 'Z', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < len; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::string manifest_path(const std::string& checkpoint_path) {
    return checkpoint_path + ".manifest.txt";
}

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, nd::Tensor>>& params,
                     const nlohmann::json& config, const nlohmann::json& extra) {
    nlohmann::json directory = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : params) {
        directory.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        offset += static_cast<std::uint64_t>(t.size()) * sizeof(double);
    }
    nlohmann::json header{
        {"config", config}, {"extra", extra}, {"tensors", directory}, {"version", kVersion}};
    std::string header_bytes = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + path);
    out.write(kMagic, sizeof(kMagic));
    std::uint32_t version = kVersion;
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    std::uint64_t header_len = header_bytes.size();
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_bytes.data(), static_cast<std::streamsize>(header_bytes.size()));
    for (const auto& [name, t] : params)
        out.write(reinterpret_cast<const char*>(t.value().data()),
                  static_cast<std::streamsize>(t.value().size() * sizeof(double)));
    if (!out) throw ConfigError("write failed for checkpoint " + path);
    out.close();

    std::ofstream manifest(manifest_path(path));
    if (!manifest) throw ConfigError("cannot write checkpoint manifest for " + path);
    manifest << "checkpoint " << path << " version " << kVersion << "\n";
    std::ostringstream hh;
    hh << std::hex << fnv1a(header_bytes.data(), header_bytes.size());
    manifest << "header fnv1a:" << hh.str() << "\n";
    for (const auto& [name, t] : params) {
        manifest << name << " shape=[";
        for (size_t k = 0; k < t.shape().size(); ++k)
            manifest << (k ? "," : "") << t.shape()[k];
        std::ostringstream ss;
        ss << std::hex << fnv1a(t.value().data(), t.value().size() * sizeof(double));
        manifest << "] fnv1a:" << ss.str() << "\n";
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw ConfigError("not a checkpoint file: " + path);
    std::uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), sizeof(version));
    if (version != kVersion)
        throw ConfigError("unsupported checkpoint version " + std::to_string(version));
    std::uint64_t header_len = 0;
    in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
    std::string header_bytes(header_len, '\0');
    in.read(header_bytes.data(), static_cast<std::streamsize>(header_len));
    if (!in) throw ConfigError("truncated checkpoint header in " + path);
    nlohmann::json header = nlohmann::json::parse(header_bytes);

    LoadedCheckpoint loaded;
    loaded.config = header.at("config");
    loaded.extra = header.at("extra");
    for (const auto& entry : header.at("tensors")) {
        std::string name = entry.at("name").get<std::string>();
        nd::Shape shape = entry.at("shape").get<nd::Shape>();
        long numel = 1;
        for (int d : shape) numel *= d;
        std::vector<double> values(static_cast<size_t>(numel));
        in.read(reinterpret_cast<char*>(values.data()),
                static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (!in) throw ConfigError("truncated tensor data for '" + name + "' in " + path);
        loaded.params.emplace(name, nd::Tensor::from(shape, std::move(values)));
    }
    return loaded;
}

}  // namespace codegaze::ckpt
