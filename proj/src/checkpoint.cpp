#include "mst/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "mst/errors.hpp"

namespace mst {

namespace {

constexpr char kMagic[5] = {'M', 'S', 'T', 'X', '1'};

std::array<std::uint32_t, 256> make_crc_table() {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint32_t c = i;
        for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
        t[i] = c;
    }
    return t;
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t& off) {
    if (off + 4 > in.size()) throw CorruptionError("checkpoint truncated inside a u32 field");
    std::uint32_t v = static_cast<std::uint32_t>(in[off]) |
                      (static_cast<std::uint32_t>(in[off + 1]) << 8) |
                      (static_cast<std::uint32_t>(in[off + 2]) << 16) |
                      (static_cast<std::uint32_t>(in[off + 3]) << 24);
    off += 4;
    return v;
}

std::string serialize_config(const std::map<std::string, std::string>& config) {
    std::string s;
    for (const auto& [k, v] : config) {
        s += k;
        s += '=';
        s += v;
        s += '\n';
    }
    return s;
}

} // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
    static const auto table = make_crc_table();
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::size_t checkpoint_size(const CheckpointData& data) {
    std::size_t n = 5 + 4; // magic + count
    for (const auto& [name, t] : data.tensors)
        n += 4 + name.size() + 4 + 4 * t.rank() + 4 * t.size();
    n += serialize_config(data.config).size();
    return n + 4; // CRC
}

void write_checkpoint(const CheckpointData& data, const std::string& path) {
    std::vector<std::uint8_t> buf;
    buf.reserve(checkpoint_size(data));
    buf.insert(buf.end(), kMagic, kMagic + 5);
    put_u32(buf, static_cast<std::uint32_t>(data.tensors.size()));
    for (const auto& [name, t] : data.tensors) {
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        put_u32(buf, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t i = 0; i < t.rank(); ++i)
            put_u32(buf, static_cast<std::uint32_t>(t.dim(i)));
        for (std::size_t i = 0; i < t.size(); ++i) {
            const float f = static_cast<float>(t.at(i));
            put_u32(buf, std::bit_cast<std::uint32_t>(f));
        }
    }
    const std::string cfg = serialize_config(data.config);
    buf.insert(buf.end(), cfg.begin(), cfg.end());
    put_u32(buf, crc32(buf.data(), buf.size()));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

CheckpointData read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path + "'");
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

    if (buf.size() < 5 || std::memcmp(buf.data(), kMagic, 5) != 0)
        throw FormatError("'" + path + "' is not a checkpoint (bad magic)");
    if (buf.size() < 5 + 4 + 4) throw CorruptionError("checkpoint '" + path + "' truncated");

    const std::uint32_t stored = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16) |
                                 (static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24);
    if (crc32(buf.data(), buf.size() - 4) != stored)
        throw CorruptionError("checkpoint '" + path + "' failed its CRC check");

    const std::size_t end = buf.size() - 4;
    std::size_t off = 5;
    CheckpointData data;
    const std::uint32_t count = get_u32(buf, off);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(buf, off);
        if (off + name_len > end) throw CorruptionError("checkpoint truncated inside a name");
        std::string name(buf.begin() + static_cast<std::ptrdiff_t>(off),
                         buf.begin() + static_cast<std::ptrdiff_t>(off + name_len));
        off += name_len;
        const std::uint32_t rank = get_u32(buf, off);
        if (rank < 1 || rank > 3)
            throw CorruptionError("checkpoint tensor '" + name + "' has rank " +
                                  std::to_string(rank));
        std::vector<std::size_t> shape;
        for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get_u32(buf, off));
        Tensor t(shape);
        if (off + 4 * t.size() > end)
            throw CorruptionError("checkpoint truncated inside tensor '" + name + "'");
        for (std::size_t j = 0; j < t.size(); ++j) {
            std::uint32_t bits = get_u32(buf, off);
            t.at(j) = static_cast<double>(std::bit_cast<float>(bits));
        }
        data.tensors.emplace_back(std::move(name), std::move(t));
    }

    std::string cfg(buf.begin() + static_cast<std::ptrdiff_t>(off),
                    buf.begin() + static_cast<std::ptrdiff_t>(end));
    std::size_t pos = 0;
    while (pos < cfg.size()) {
        std::size_t nl = cfg.find('\n', pos);
        if (nl == std::string::npos) nl = cfg.size();
        std::string line = cfg.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw CorruptionError("checkpoint config line without '=': " + line);
        data.config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return data;
}

} // namespace mst
