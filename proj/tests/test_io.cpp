#include "doctest.h"

#include <bit>
#include <cstring>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <unistd.h>

#include "dbp/errors.hpp"
#include "dbp/io.hpp"
#include "dbp/nn/model.hpp"
#include "dbp/phantom.hpp"
#include "dbp/pipeline.hpp"
#include "dbp/projection.hpp"
#include "dbp/random.hpp"

using namespace dbp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("dbp_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static inline int counter = 0;
};

// Arbitrary bit patterns, including NaNs with payloads, infinities, -0 and subnormals.
double random_bits(Rng& rng) {
    switch (rng.below(6)) {
        case 0: return std::bit_cast<double>(rng.next());
        case 1: return -0.0;
        case 2: return std::numeric_limits<double>::denorm_min() * double(rng.below(1000) + 1);
        case 3: return std::bit_cast<double>(0x7ff8000000000000ull | (rng.next() & 0xfffffffffffffull));
        case 4: return rng.uniform() < 0.5 ? INFINITY : -INFINITY;
        default: return rng.uniform(-1e6, 1e6);
    }
}

bool same_bits(std::span<const double> a, std::span<const double> b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

std::string failure_field(const auto& f) {
    try {
        f();
    } catch (const FormatError& e) {
        return e.field() + "@" + std::to_string(e.offset());
    }
    return "no error";
}

}  // namespace

TEST_CASE("tensor containers round-trip bit-exactly over random shapes") {
    Rng rng(99);
    TempDir dir;
    for (int trial = 0; trial < 300; ++trial) {
        io::TensorBlob blob;
        const std::size_t rank = rng.below(5);
        for (std::size_t d = 0; d < rank; ++d) blob.dims.push_back(static_cast<std::uint32_t>(rng.below(7)));
        blob.values.resize(blob.element_count());
        for (double& v : blob.values) v = random_bits(rng);

        const auto bytes = io::encode_tensor(blob);
        CHECK(bytes.size() == 7 + 4 * rank + 8 * blob.values.size());
        std::size_t offset = 0;
        const auto back = io::decode_tensor(bytes, offset);
        CHECK(offset == bytes.size());
        CHECK(back.dims == blob.dims);
        CHECK(same_bits(back.values, blob.values));

        const fs::path p = dir.path / "t.dbpt";
        io::save_tensor(p, blob);
        const auto loaded = io::load_tensor(p);
        CHECK(loaded.dims == blob.dims);
        CHECK(same_bits(loaded.values, blob.values));
    }
}

TEST_CASE("header layout") {
    const auto bytes = io::encode_tensor({{2, 3}, {1, 2, 3, 4, 5, 6}});
    REQUIRE(bytes.size() == 15 + 48);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DBPT");
    CHECK(bytes[4] == 0x01);
    CHECK(bytes[5] == 0x01);
    CHECK(bytes[6] == 2);
    CHECK(std::vector<std::uint8_t>(bytes.begin() + 7, bytes.begin() + 15) ==
          std::vector<std::uint8_t>{2, 0, 0, 0, 3, 0, 0, 0});
    // 1.0 little-endian: 00 .. 00 f0 3f
    CHECK(bytes[15 + 6] == 0xf0);
    CHECK(bytes[15 + 7] == 0x3f);
}

TEST_CASE("image, sinogram, vector and back-projection tensor round trips") {
    TempDir dir;
    Rng rng(4);
    for (std::size_t n : {8u, 17u, 64u}) {
        Image img(n);
        for (double& v : img.data()) v = random_bits(rng);
        io::save_image(dir.path / "img.dbpt", img);
        const Image back = io::load_image(dir.path / "img.dbpt");
        CHECK(back.size() == n);
        CHECK(same_bits(back.data(), img.data()));
    }

    const auto angles = uniform_angles(16);
    Sinogram sino(64, angles);
    for (double& v : sino.data()) v = rng.uniform(0.0, 40.0);
    io::save_sinogram(dir.path / "sino.dbpt", sino);
    CHECK(io::load_sinogram(dir.path / "sino.dbpt", angles) == sino);
    CHECK_THROWS_AS(io::load_sinogram(dir.path / "sino.dbpt", uniform_angles(8)), FormatError);

    io::save_vector(dir.path / "angles.dbpt", angles);
    CHECK(io::load_vector(dir.path / "angles.dbpt") == angles);
    CHECK_THROWS_AS(io::load_image(dir.path / "angles.dbpt"), FormatError);

    PhantomSpec spec;
    const auto g = ProjectionGeometry::square(64);
    const BpTensor z = build_bp_tensor(radon(generate_phantom(spec), angles, g), g);
    io::save_bp_tensor(dir.path / "z.dbpt", z);
    CHECK(fs::file_size(dir.path / "z.dbpt") == 7 + 3 * 4 + 524288);
    CHECK(io::load_bp_tensor(dir.path / "z.dbpt", angles) == z);
}

TEST_CASE("truncated, bad-magic and bad-version inputs name the field and offset") {
    TempDir dir;
    Image img(64);
    io::save_image(dir.path / "img.dbpt", img);
    auto bytes = io::read_file(dir.path / "img.dbpt");
    REQUIRE(bytes.size() == 15 + 32768);

    auto cut = bytes;
    cut.pop_back();
    io::write_file(dir.path / "cut.dbpt", cut);
    CHECK(failure_field([&] { io::load_image(dir.path / "cut.dbpt"); }) == "payload@32782");

    auto magic = bytes;
    magic[1] = 'X';
    io::write_file(dir.path / "magic.dbpt", magic);
    CHECK(failure_field([&] { io::load_image(dir.path / "magic.dbpt"); }) == "magic@0");

    auto version = bytes;
    version[4] = 0x02;
    io::write_file(dir.path / "version.dbpt", version);
    CHECK(failure_field([&] { io::load_image(dir.path / "version.dbpt"); }) == "version@4");

    auto dtype = bytes;
    dtype[5] = 0x07;
    CHECK(failure_field([&] {
              std::size_t off = 0;
              io::decode_tensor(dtype, off);
          }) == "dtype@5");

    const std::vector<std::uint8_t> header_only(bytes.begin(), bytes.begin() + 9);
    CHECK(failure_field([&] {
              std::size_t off = 0;
              io::decode_tensor(header_only, off);
          }) == "dims@9");

    auto trailing = bytes;
    trailing.push_back(0);
    io::write_file(dir.path / "trailing.dbpt", trailing);
    CHECK(failure_field([&] { io::load_image(dir.path / "trailing.dbpt"); }) == "payload@32783");

    CHECK_THROWS_AS(io::read_file(dir.path / "missing.dbpt"), IoError);
}

TEST_CASE("checkpoint round trip reproduces reconstructions bit-exactly") {
    TempDir dir;
    nn::Model model = nn::Model::initialized({16, 6, 2}, 7);
    // Move running statistics off their defaults so they are exercised too.
    Rng rng(2);
    for (auto& block : model.blocks()) {
        for (double& v : block.bn.running_mean) v = rng.uniform(-1.0, 1.0);
        for (double& v : block.bn.running_var) v = rng.uniform(0.5, 2.0);
        for (double& v : block.bn.gamma) v = rng.uniform(0.5, 1.5);
    }
    const io::Metadata meta{{"seed", "7"}, {"epochs", "15"}, {"size", "64"}};
    io::save_checkpoint(dir.path / "m.dbpm", model, meta);
    const auto ck = io::load_checkpoint(dir.path / "m.dbpm");
    CHECK(ck.model.config() == model.config());
    CHECK(ck.metadata.at("seed") == "7");
    CHECK(ck.metadata.at("depth") == "2");
    CHECK(ck.metadata.at("width") == "6");
    CHECK(ck.metadata.at("views") == "16");
    const auto a = model.state_tensors();
    const auto b = ck.model.state_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(same_bits(std::as_const(model).state_tensors()[k], b[k]));

    PhantomSpec spec;
    const auto g = ProjectionGeometry::square(64);
    const Sinogram sino = radon(generate_phantom(spec), uniform_angles(16), g);
    const Image before = reconstruct_dbp(sino, model, g);
    const Image after = reconstruct_dbp(sino, ck.model, g);
    CHECK(same_bits(before.data(), after.data()));

    // Same bytes when saved again.
    io::save_checkpoint(dir.path / "m2.dbpm", ck.model, ck.metadata);
    CHECK(io::read_file(dir.path / "m.dbpm") == io::read_file(dir.path / "m2.dbpm"));
}

TEST_CASE("checkpoint validation") {
    const nn::Model model = nn::Model::initialized({4, 3, 1}, 1);
    const auto bytes = io::encode_checkpoint(model, {});
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DBPM");
    CHECK(bytes[4] == 0x01);

    auto cut = bytes;
    cut.resize(cut.size() - 3);
    CHECK_THROWS_AS(io::decode_checkpoint(cut), FormatError);
    auto magic = bytes;
    magic[0] = 'X';
    CHECK(failure_field([&] { io::decode_checkpoint(magic); }) == "magic@0");
    auto version = bytes;
    version[4] = 9;
    CHECK(failure_field([&] { io::decode_checkpoint(version); }) == "version@4");

    // A checkpoint whose metadata promises a deeper model than its blobs hold.
    const nn::Model deeper = nn::Model::initialized({4, 3, 2}, 1);
    auto lying = io::encode_checkpoint(deeper, {});
    const std::string text(lying.begin() + 9, lying.begin() + 9 + (lying[5] | lying[6] << 8));
    const auto pos = text.find("depth=2");
    REQUIRE(pos != std::string::npos);
    lying[9 + pos + 6] = '3';
    CHECK_THROWS_AS(io::decode_checkpoint(lying), FormatError);

    CHECK_THROWS_AS(io::encode_checkpoint(model, {{"bad\nkey", "1"}}), InvalidInput);
}

TEST_CASE("pgm export bytes") {
    Image zero(4), one(4), half(4);
    for (double& v : one.data()) v = 1.0;
    for (double& v : half.data()) v = 0.5;
    const std::string header = "P5\n4 4\n255\n";

    const auto z = io::encode_pgm(std::span<const Image>(&zero, 1));
    CHECK(std::string(z.begin(), z.begin() + header.size()) == header);
    REQUIRE(z.size() == header.size() + 16);
    for (std::size_t i = header.size(); i < z.size(); ++i) CHECK(z[i] == 0x00);

    const auto o = io::encode_pgm(std::span<const Image>(&one, 1));
    for (std::size_t i = header.size(); i < o.size(); ++i) CHECK(o[i] == 0xFF);

    const auto h = io::encode_pgm(std::span<const Image>(&half, 1));
    for (std::size_t i = header.size(); i < h.size(); ++i) CHECK(h[i] == 128);

    const std::vector<Image> strip{zero, half, one};
    const auto s = io::encode_pgm(strip);
    const std::string strip_header = "P5\n12 4\n255\n";
    CHECK(std::string(s.begin(), s.begin() + strip_header.size()) == strip_header);
    const std::uint8_t* row = s.data() + strip_header.size();
    CHECK(row[0] == 0);
    CHECK(row[4] == 128);
    CHECK(row[8] == 255);
    CHECK(row[11] == 255);
}
