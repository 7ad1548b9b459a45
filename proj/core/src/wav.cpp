#include "pipematch/wav.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "pipematch/errors.hpp"
#include "pipematch/io.hpp"

namespace pipematch {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& s, std::uint32_t v) {
    s += static_cast<char>(v & 0xFF);
    s += static_cast<char>((v >> 8) & 0xFF);
    s += static_cast<char>((v >> 16) & 0xFF);
    s += static_cast<char>((v >> 24) & 0xFF);
}

void put_u16(std::string& s, std::uint16_t v) {
    s += static_cast<char>(v & 0xFF);
    s += static_cast<char>((v >> 8) & 0xFF);
}

}  // namespace

WavData read_wav(const std::string& path) {
    const std::string raw = read_file(path);
    const auto* data = reinterpret_cast<const unsigned char*>(raw.data());
    const std::size_t size = raw.size();
    if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 || std::memcmp(data + 8, "WAVE", 4) != 0)
        throw FormatError(path + ": not a RIFF/WAVE file");

    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits = 0;
    bool have_fmt = false;
    std::size_t data_off = 0;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= size) {
        const char* id = reinterpret_cast<const char*>(data + pos);
        const std::uint32_t chunk_len = read_u32(data + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_len > size) throw FormatError(path + ": truncated chunk");
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (chunk_len < 16) throw FormatError(path + ": short fmt chunk");
            format = read_u16(data + body);
            channels = read_u16(data + body + 2);
            sample_rate = read_u32(data + body + 4);
            bits = read_u16(data + body + 14);
            if (format == kFormatExtensible) {
                if (chunk_len < 40) throw FormatError(path + ": short extensible fmt chunk");
                // SubFormat GUID starts with the base format tag.
                format = read_u16(data + body + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data_off = body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);
    }

    if (!have_fmt || data_off == 0) throw FormatError(path + ": missing fmt or data chunk");
    if (channels == 0 || sample_rate == 0) throw FormatError(path + ": bad fmt chunk");

    const std::size_t bytes_per = bits / 8;
    if (bytes_per == 0) throw UnsupportedEncoding(path + ": zero bit depth");
    const std::size_t frame_bytes = bytes_per * channels;
    const std::size_t frames = data_len / frame_bytes;

    auto decode = [&](std::size_t off) -> double {
        const unsigned char* p = data + off;
        if (format == kFormatPcm && bits == 16) {
            const auto v = static_cast<std::int16_t>(read_u16(p));
            return v / 32768.0;
        }
        if (format == kFormatPcm && bits == 24) {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF;
            return v / 8388608.0;
        }
        if (format == kFormatPcm && bits == 32) {
            const auto v = static_cast<std::int32_t>(read_u32(p));
            return v / 2147483648.0;
        }
        if (format == kFormatFloat && bits == 32) {
            float f;
            std::memcpy(&f, p, 4);
            return f;
        }
        if (format == kFormatFloat && bits == 64) {
            double d;
            std::memcpy(&d, p, 8);
            return d;
        }
        throw UnsupportedEncoding(path + ": format tag " + std::to_string(format) + ", " +
                                  std::to_string(bits) + " bits");
    };

    // Multichannel files contribute only their first channel.
    WavData out;
    out.sample_rate = sample_rate;
    out.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i)
        out.samples[i] = decode(data_off + i * frame_bytes);
    return out;
}

void write_wav(const std::string& path, const std::vector<double>& samples, double sample_rate) {
    const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(sample_rate));
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 4);

    std::string out;
    out.reserve(58 + data_bytes);
    out += "RIFF";
    put_u32(out, 4 + 8 + 16 + 8 + data_bytes);
    out += "WAVE";
    out += "fmt ";
    put_u32(out, 16);
    put_u16(out, kFormatFloat);
    put_u16(out, 1);
    put_u32(out, rate);
    put_u32(out, rate * 4);
    put_u16(out, 4);
    put_u16(out, 32);
    out += "data";
    put_u32(out, data_bytes);
    for (double s : samples) {
        const float f = static_cast<float>(s);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
    }
    atomic_write_file(path, out);
}

}  // namespace pipematch
