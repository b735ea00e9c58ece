#include "pllhb/error.hpp"
#include "pllhb/io.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

using namespace pllhb;
namespace fs = std::filesystem;

TEST_CASE("key-value parsing") {
    const auto c = io::parse_key_value("# header\n\n k_vco = 250 \nname=a=b\r\nempty=\n");
    CHECK(c.at("k_vco") == "250");
    CHECK(c.at("name") == "a=b");
    CHECK(c.at("empty").empty());
    CHECK(c.size() == 3);
    CHECK(io::parse_key_value("a=1\na=2\n").at("a") == "2");
    CHECK_THROWS_AS(io::parse_key_value("just words\n"), ParameterError);
    CHECK_THROWS_AS(io::parse_key_value("=5\n"), ParameterError);
}

TEST_CASE("required doubles") {
    const auto c = io::parse_key_value("a=1.5\nb=1e-3\nc=abc\nd=1.5x\n");
    CHECK(io::require_double(c, "a") == 1.5);
    CHECK(io::require_double(c, "b") == 1e-3);
    CHECK_THROWS_AS(io::require_double(c, "c"), ParameterError);
    CHECK_THROWS_AS(io::require_double(c, "d"), ParameterError);
    CHECK_THROWS_AS(io::require_double(c, "missing"), ParameterError);
}

TEST_CASE("17-digit formatting round-trips") {
    std::mt19937_64 rng(2718);
    std::uniform_int_distribution<std::uint64_t> bits;
    for (int i = 0; i < 10000; ++i) {
        double v;
        const std::uint64_t b = bits(rng);
        std::memcpy(&v, &b, sizeof v);
        if (!std::isfinite(v)) {
            continue;
        }
        const auto text = io::format_double(v);
        const auto back = io::require_double({{"v", text}}, "v");
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
    CHECK(io::format_double(0.1) == "0.10000000000000001");
    CHECK(io::format_double(250.0) == "250");
}

TEST_CASE("atomic file writes") {
    const fs::path dir = fs::temp_directory_path() / "pllhb_io_test";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path target = dir / "out.txt";
    io::write_file_atomic(target, "first\n");
    io::write_file_atomic(target, "second\n");
    CHECK(io::read_file(target) == "second\n");
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) {
        ++files;
    }
    CHECK(files == 1);
    CHECK_THROWS_AS(io::read_file(dir / "missing.txt"), Error);
    CHECK_THROWS_AS(io::write_file_atomic(dir / "no" / "such" / "dir.txt", "x"), Error);
    fs::remove_all(dir);
}
