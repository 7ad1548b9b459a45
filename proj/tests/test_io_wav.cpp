#include <atomic>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include <doctest.h>

#include <pipematch/errors.hpp>
#include <pipematch/io.hpp>
#include <pipematch/rng.hpp>
#include <pipematch/wav.hpp>

using namespace pipematch;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("pipematch_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void push_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(char((v >> (8 * i)) & 0xFF));
}
void push_u16(std::string& s, std::uint16_t v) {
    for (int i = 0; i < 2; ++i) s.push_back(char((v >> (8 * i)) & 0xFF));
}

// Minimal PCM WAV builder for decode tests.
std::string build_wav(std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                      std::uint16_t bits, const std::string& payload) {
    std::string fmt;
    push_u16(fmt, format);
    push_u16(fmt, channels);
    push_u32(fmt, rate);
    push_u32(fmt, rate * channels * bits / 8);
    push_u16(fmt, std::uint16_t(channels * bits / 8));
    push_u16(fmt, bits);

    std::string out = "RIFF";
    push_u32(out, std::uint32_t(4 + 8 + fmt.size() + 8 + payload.size()));
    out += "WAVE";
    out += "fmt ";
    push_u32(out, std::uint32_t(fmt.size()));
    out += fmt;
    out += "data";
    push_u32(out, std::uint32_t(payload.size()));
    out += payload;
    return out;
}

}  // namespace

TEST_SUITE_BEGIN("io_wav");

TEST_CASE("atomic_write_file round-trips and creates parents") {
    TempDir tmp;
    const std::string path = tmp.file("a/b/c.txt");
    atomic_write_file(path, "hello\n");
    CHECK(read_file(path) == "hello\n");
    atomic_write_file(path, "replaced");
    CHECK(read_file(path) == "replaced");
    // No temp litter left behind.
    std::size_t entries = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.file("a/b"))) ++entries;
    CHECK(entries == 1);
}

TEST_CASE("write failure leaves no partial file") {
    // Parent path is a regular file, so the write must fail for any uid.
    TempDir tmp;
    const std::string blocker = tmp.file("blocker");
    atomic_write_file(blocker, "x");
    CHECK_THROWS_AS(atomic_write_file(blocker + "/x.txt", "data"), UnreadableFile);
    CHECK(!fs::exists(blocker + "/x.txt"));
    CHECK(read_file(blocker) == "x");
}

TEST_CASE("read_file on a missing path throws") {
    CHECK_THROWS_AS(read_file("/no/such/file/anywhere"), UnreadableFile);
}

TEST_CASE("csv escaping round-trips awkward cells") {
    const std::vector<std::string> row = {"plain", "with,comma", "with\"quote", "multi\nline", ""};
    const std::string joined = csv_join(row);
    CHECK(csv_split(joined) == row);
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
}

TEST_CASE("parallel_for covers every index exactly once") {
    std::vector<std::atomic<int>> hits(1000);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for propagates the worker exception") {
    CHECK_THROWS_AS(parallel_for(100, 4,
                                 [&](std::size_t i) {
                                     if (i == 37) throw FormatError("boom");
                                 }),
                    FormatError);
}

TEST_CASE("raw byte helpers detect truncation") {
    std::string blob;
    append_raw(blob, std::uint32_t(7));
    append_raw(blob, 1.5);
    std::size_t off = 0;
    CHECK(read_raw<std::uint32_t>(blob, off) == 7);
    CHECK(read_raw<double>(blob, off) == 1.5);
    CHECK_THROWS_AS(read_raw<double>(blob, off), FormatError);
}

TEST_CASE("float wav round-trips at float precision") {
    TempDir tmp;
    Rng rng(61);
    std::vector<double> x(4096);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    const std::string path = tmp.file("t.wav");
    write_wav(path, x, 32000.0);
    const WavData back = read_wav(path);
    CHECK(back.sample_rate == 32000.0);
    REQUIRE(back.samples.size() == x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(back.samples[i] == double(float(x[i])));
}

TEST_CASE("pcm16 decoding and scaling") {
    TempDir tmp;
    std::string payload;
    push_u16(payload, std::uint16_t(0x7FFF));   // +max
    push_u16(payload, std::uint16_t(0x8000));   // -max
    push_u16(payload, 0);
    const std::string path = tmp.file("pcm16.wav");
    atomic_write_file(path, build_wav(1, 1, 22050, 16, payload));
    const WavData w = read_wav(path);
    CHECK(w.sample_rate == 22050.0);
    REQUIRE(w.samples.size() == 3);
    CHECK(w.samples[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(w.samples[1] == doctest::Approx(-1.0).epsilon(1e-4));
    CHECK(w.samples[2] == 0.0);
}

TEST_CASE("pcm24 sign extension") {
    TempDir tmp;
    std::string payload;
    // +2^23-1, -2^23, and -1 (0xFFFFFF)
    payload += "\xFF\xFF\x7F";
    payload += std::string("\x00\x00\x80", 3);
    payload += "\xFF\xFF\xFF";
    const std::string path = tmp.file("pcm24.wav");
    atomic_write_file(path, build_wav(1, 1, 48000, 24, payload));
    const WavData w = read_wav(path);
    REQUIRE(w.samples.size() == 3);
    CHECK(w.samples[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(w.samples[1] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(w.samples[2] == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(w.samples[2] < 0.0);
}

TEST_CASE("stereo keeps the first channel") {
    TempDir tmp;
    std::string payload;
    push_u16(payload, std::uint16_t(0x4000));  // L ~ 0.5
    push_u16(payload, std::uint16_t(0xC000));  // R ~ -0.5
    push_u16(payload, std::uint16_t(0x2000));  // L ~ 0.25
    push_u16(payload, 0);                      // R
    const std::string path = tmp.file("st.wav");
    atomic_write_file(path, build_wav(1, 2, 32000, 16, payload));
    const WavData w = read_wav(path);
    REQUIRE(w.samples.size() == 2);
    CHECK(w.samples[0] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(w.samples[1] == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("malformed wavs are rejected") {
    TempDir tmp;
    const std::string p1 = tmp.file("bad1.wav");
    atomic_write_file(p1, "definitely not a wav file");
    CHECK_THROWS_AS(read_wav(p1), FormatError);

    const std::string p2 = tmp.file("bad2.wav");
    atomic_write_file(p2, build_wav(1, 1, 32000, 12, "xx"));  // 12-bit unsupported
    CHECK_THROWS_AS(read_wav(p2), UnsupportedEncoding);

    CHECK_THROWS_AS(read_wav(tmp.file("missing.wav")), UnreadableFile);
}

TEST_SUITE_END();
