#include "restain/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace restain {

namespace {

constexpr std::uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};

std::uint32_t read_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
}

std::vector<std::uint8_t> zlib_inflate(const std::vector<std::uint8_t>& in, std::size_t expected) {
    std::vector<std::uint8_t> out(expected);
    uLongf outLen = static_cast<uLongf>(out.size());
    const int rc = ::uncompress(out.data(), &outLen, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK)
        throw Error("PNG decode failed: corrupt or truncated IDAT stream");
    if (outLen != expected)
        throw Error("PNG decode failed: unexpected decompressed size");
    return out;
}

std::vector<std::uint8_t> zlib_deflate(const std::vector<std::uint8_t>& in) {
    uLongf bound = ::compressBound(static_cast<uLong>(in.size()));
    std::vector<std::uint8_t> out(bound);
    const int rc = ::compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), Z_DEFAULT_COMPRESSION);
    if (rc != Z_OK)
        throw Error("PNG encode failed: deflate error");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// Reverses PNG row filters in place. raw holds height rows of
// (1 filter byte + width*bpp data bytes).
void unfilter(std::vector<std::uint8_t>& raw, int width, int height, int bpp) {
    const std::size_t rowBytes = static_cast<std::size_t>(width) * bpp;
    std::vector<std::uint8_t> prev(rowBytes, 0);
    for (int y = 0; y < height; ++y) {
        std::uint8_t* row = &raw[static_cast<std::size_t>(y) * (rowBytes + 1)];
        const std::uint8_t filter = row[0];
        std::uint8_t* cur = row + 1;
        switch (filter) {
        case 0:
            break;
        case 1: // Sub
            for (std::size_t i = bpp; i < rowBytes; ++i)
                cur[i] = static_cast<std::uint8_t>(cur[i] + cur[i - bpp]);
            break;
        case 2: // Up
            for (std::size_t i = 0; i < rowBytes; ++i)
                cur[i] = static_cast<std::uint8_t>(cur[i] + prev[i]);
            break;
        case 3: // Average
            for (std::size_t i = 0; i < rowBytes; ++i) {
                const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
                cur[i] = static_cast<std::uint8_t>(cur[i] + ((left + prev[i]) >> 1));
            }
            break;
        case 4: // Paeth
            for (std::size_t i = 0; i < rowBytes; ++i) {
                const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - bpp] : 0;
                const int upleft = i >= static_cast<std::size_t>(bpp) ? prev[i - bpp] : 0;
                cur[i] = static_cast<std::uint8_t>(cur[i] + paeth(left, prev[i], upleft));
            }
            break;
        default:
            throw Error("PNG decode failed: unknown row filter " + std::to_string(filter));
        }
        std::memcpy(prev.data(), cur, rowBytes);
    }
}

} // namespace

RgbImage load_png(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw Error("cannot open PNG for reading: " + path.string());

    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0)
        throw Error("not a PNG file: " + path.string());

    int width = 0, height = 0, bitDepth = 0, colorType = 0;
    bool sawIhdr = false, sawIend = false;
    std::vector<std::uint8_t> idat;

    std::size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = read_u32be(&bytes[pos]);
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        if (pos + 12 + len > bytes.size())
            throw Error("truncated PNG: " + path.string());
        const std::uint8_t* data = &bytes[pos + 8];

        const std::uint32_t crcStored = read_u32be(&bytes[pos + 8 + len]);
        std::uint32_t crc = ::crc32(0, reinterpret_cast<const Bytef*>(type), 4);
        crc = ::crc32(crc, data, len);
        if (crc != crcStored)
            throw Error("PNG chunk CRC mismatch: " + path.string());

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13)
                throw Error("invalid IHDR length");
            width = static_cast<int>(read_u32be(data));
            height = static_cast<int>(read_u32be(data + 4));
            bitDepth = data[8];
            colorType = data[9];
            if (width < 1 || height < 1)
                throw Error("invalid PNG dimensions");
            if (bitDepth != 8)
                throw Error("unsupported bit depth: " + std::to_string(bitDepth) + " (only 8-bit supported)");
            if (colorType != 2 && colorType != 6)
                throw Error("unsupported colour type: " + std::to_string(colorType) + " (only RGB/RGBA supported)");
            if (data[10] != 0 || data[11] != 0)
                throw Error("unsupported PNG compression/filter method");
            if (data[12] != 0)
                throw Error("unsupported interlaced PNG");
            sawIhdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            sawIend = true;
            break;
        }
        pos += 12 + len;
    }

    if (!sawIhdr || !sawIend || idat.empty())
        throw Error("truncated PNG: " + path.string());

    const int channels = colorType == 6 ? 4 : 3;
    const std::size_t rowBytes = static_cast<std::size_t>(width) * channels;
    std::vector<std::uint8_t> raw = zlib_inflate(idat, (rowBytes + 1) * height);
    unfilter(raw, width, height, channels);

    RgbImage img(width, height);
    for (int y = 0; y < height; ++y) {
        const std::uint8_t* src = &raw[static_cast<std::size_t>(y) * (rowBytes + 1) + 1];
        std::uint8_t* dst = &img.data[static_cast<std::size_t>(y) * width * 3];
        if (channels == 3) {
            std::memcpy(dst, src, rowBytes);
        } else {
            for (int x = 0; x < width; ++x) { // drop alpha
                dst[x * 3 + 0] = src[x * 4 + 0];
                dst[x * 3 + 1] = src[x * 4 + 1];
                dst[x * 3 + 2] = src[x * 4 + 2];
            }
        }
    }
    return img;
}

void save_png(const RgbImage& img, const std::filesystem::path& path) {
    if (img.width < 1 || img.height < 1 || img.data.size() != img.pixel_count() * 3)
        throw Error("save_png: malformed RgbImage");

    const std::size_t rowBytes = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw((rowBytes + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        std::uint8_t* row = &raw[static_cast<std::size_t>(y) * (rowBytes + 1)];
        row[0] = 0; // filter: none
        std::memcpy(row + 1, &img.data[static_cast<std::size_t>(y) * rowBytes], rowBytes);
    }
    const std::vector<std::uint8_t> z = zlib_deflate(raw);

    std::vector<std::uint8_t> out;
    out.reserve(z.size() + 128);
    out.insert(out.end(), kSignature, kSignature + 8);

    auto chunk = [&out](const char type[4], const std::uint8_t* data, std::size_t len) {
        put_u32be(out, static_cast<std::uint32_t>(len));
        out.insert(out.end(), type, type + 4);
        if (len > 0)
            out.insert(out.end(), data, data + len);
        std::uint32_t crc = ::crc32(0, reinterpret_cast<const Bytef*>(type), 4);
        if (len > 0)
            crc = ::crc32(crc, data, static_cast<uInt>(len));
        put_u32be(out, crc);
    };

    std::vector<std::uint8_t> ih;
    put_u32be(ih, static_cast<std::uint32_t>(img.width));
    put_u32be(ih, static_cast<std::uint32_t>(img.height));
    ih.push_back(8); // bit depth
    ih.push_back(2); // colour type: truecolour RGB
    ih.push_back(0); // compression
    ih.push_back(0); // filter
    ih.push_back(0); // interlace
    chunk("IHDR", ih.data(), ih.size());
    chunk("IDAT", z.data(), z.size());
    chunk("IEND", nullptr, 0);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("cannot open PNG for writing: " + path.string());
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f)
        throw Error("PNG write failed: " + path.string());
}

} // namespace restain
