#include "restain/nn/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace restain::nn {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'N', 'M'};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& buf, const std::string& path)
        : buf_(buf), path_(path) {}

    std::uint16_t u16() {
        const std::uint16_t lo = byte();
        const std::uint16_t hi = byte();
        return static_cast<std::uint16_t>(lo | hi << 8);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(byte()) << (8 * i);
        return v;
    }
    float f32() {
        const std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string str(std::size_t len) {
        need(len);
        std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    std::uint8_t byte() {
        need(1);
        return buf_[pos_++];
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (pos_ + n > buf_.size())
            throw Error("checkpoint truncated: " + path_);
    }
    const std::vector<std::uint8_t>& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

} // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : records)
        if (n == name)
            return t;
    throw Error("checkpoint is missing record: " + name);
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    std::vector<std::uint8_t> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kCheckpointVersion);
    put_u32(buf, ck.epoch);
    put_u32(buf, static_cast<std::uint32_t>(ck.records.size()));
    for (const auto& [name, t] : ck.records) {
        if (name.size() > 0xffff)
            throw Error("checkpoint record name too long: " + name);
        put_u16(buf, static_cast<std::uint16_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        buf.push_back(4); // rank
        put_u32(buf, static_cast<std::uint32_t>(t.n));
        put_u32(buf, static_cast<std::uint32_t>(t.c));
        put_u32(buf, static_cast<std::uint32_t>(t.h));
        put_u32(buf, static_cast<std::uint32_t>(t.w));
        for (double v : t.data)
            put_f32(buf, static_cast<float>(v));
    }
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw Error("cannot write checkpoint: " + tmp.string());
        f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!f)
            throw Error("checkpoint write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open checkpoint: " + path.string());
    std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
    if (buf.size() < 16)
        throw Error("checkpoint truncated: " + path.string());

    if (std::memcmp(buf.data(), kMagic, 4) != 0)
        throw Error("not a model checkpoint (bad magic): " + path.string());

    const std::uint32_t storedCrc = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                    static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8 |
                                    static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16 |
                                    static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24;
    const std::uint32_t actualCrc = static_cast<std::uint32_t>(
        ::crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (storedCrc != actualCrc)
        throw Error("checkpoint corrupted (CRC mismatch): " + path.string());

    Reader r(buf, path.string());
    r.str(4); // magic, already checked
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw Error("checkpoint format version " + std::to_string(version) +
                    " is newer than supported version " + std::to_string(kCheckpointVersion));

    Checkpoint ck;
    ck.epoch = r.u32();
    const std::uint32_t count = r.u32();
    ck.records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t nameLen = r.u16();
        std::string name = r.str(nameLen);
        const std::uint8_t rank = r.byte();
        if (rank != 4)
            throw Error("checkpoint record " + name + " has unsupported rank " +
                        std::to_string(rank));
        const int n = static_cast<int>(r.u32());
        const int c = static_cast<int>(r.u32());
        const int h = static_cast<int>(r.u32());
        const int w = static_cast<int>(r.u32());
        Tensor t(n, c, h, w);
        for (double& v : t.data)
            v = static_cast<double>(r.f32());
        ck.records.emplace_back(std::move(name), std::move(t));
    }
    if (r.pos() != buf.size() - 4)
        throw Error("checkpoint has trailing bytes: " + path.string());
    return ck;
}

} // namespace restain::nn
