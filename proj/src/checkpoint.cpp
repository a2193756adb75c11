#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "textrisk/error.hpp"
#include "textrisk/network.hpp"
#include "textrisk/random.hpp"

namespace textrisk {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::string& out, T value) {
    char buf[sizeof(T)];
    std::memcpy(buf, &value, sizeof(T));
    out.append(buf, sizeof(T));
}

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string_view take(std::size_t n) {
        need(n);
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        require(bytes_.size() - pos_ >= n, ErrorKind::data, "checkpoint is truncated");
    }

    std::string_view bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::string checkpoint_bytes(const Model& model) {
    const auto& p = model.params;
    std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    nlohmann::json meta{{"network", p.config().to_json()},
                        {"vocab_hash", model.vocab_hash},
                        {"vocab_size", p.vocab_size()},
                        {"num_features", p.num_features()}};
    const std::string text = meta.dump();
    put<std::uint64_t>(out, text.size());
    out += text;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.blocks().size()));
    for (const auto& b : p.blocks()) {
        put<std::uint32_t>(out, static_cast<std::uint32_t>(b.name.size()));
        out += b.name;
        put<std::uint64_t>(out, b.size());
        for (std::size_t i = 0; i < b.size(); ++i) put<double>(out, p.values[b.offset + i]);
    }
    put<std::uint64_t>(out, fnv1a64(out));
    return out;
}

Model model_from_checkpoint(std::string_view bytes) {
    require(bytes.size() >= sizeof kCheckpointMagic + 8 &&
                std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) == 0,
            ErrorKind::data, "not a textrisk checkpoint (bad magic bytes)");
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
    require(stored == fnv1a64(bytes.substr(0, bytes.size() - 8)), ErrorKind::data, "checkpoint checksum mismatch");

    Reader in(bytes.substr(0, bytes.size() - 8));
    in.take(sizeof kCheckpointMagic);
    const auto version = in.get<std::uint32_t>();
    require(version == kCheckpointVersion, ErrorKind::data,
            "unsupported checkpoint format_version " + std::to_string(version));
    const auto meta_len = in.get<std::uint64_t>();
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in.take(meta_len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("checkpoint metadata: ") + e.what());
    }
    Model model;
    model.vocab_hash = meta.at("vocab_hash").get<std::uint64_t>();
    model.params = NetworkParams(NetworkConfig::from_json(meta.at("network")), meta.at("vocab_size").get<std::size_t>(),
                                 meta.at("num_features").get<std::size_t>());
    const auto count = in.get<std::uint32_t>();
    require(count == model.params.blocks().size(), ErrorKind::data, "checkpoint block count does not match config");
    for (const auto& b : model.params.blocks()) {
        const auto name_len = in.get<std::uint32_t>();
        const std::string_view name = in.take(name_len);
        require(name == b.name, ErrorKind::data,
                "checkpoint block '" + std::string(name) + "' found where '" + b.name + "' was expected");
        const auto n = in.get<std::uint64_t>();
        require(n == b.size(), ErrorKind::data, "checkpoint block '" + b.name + "' has wrong length");
        for (std::size_t i = 0; i < n; ++i) model.params.values[b.offset + i] = in.get<double>();
    }
    require(in.pos() == bytes.size() - 8, ErrorKind::data, "checkpoint has trailing bytes");
    return model;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
    const std::string bytes = checkpoint_bytes(model);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write checkpoint " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorKind::data, "failed writing checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open checkpoint " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_checkpoint(buf.str());
}

} // namespace textrisk
