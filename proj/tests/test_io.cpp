#include <doctest.h>

#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "dff/imageio.hpp"
#include "dff/parallel.hpp"
#include "dff/textio.hpp"
#include "support.hpp"

using namespace dff;

namespace {
std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST_CASE("pfm colour round trip is bit exact") {
  const auto dir = test::scratch_dir("io_pfm");
  const Image img = test::random_image(7, 5, 3, 11);
  write_pfm(img, dir / "a.pfm");
  const Image back = read_pfm(dir / "a.pfm");
  CHECK(back.same_shape(img));
  CHECK(back.data() == img.data());
}

TEST_CASE("pfm header and row order follow the portable float map layout") {
  const auto dir = test::scratch_dir("io_pfm_layout");
  Image img(2, 2, 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(y * 100 + x * 10 + c);
  write_pfm(img, dir / "b.pfm");
  const std::string bytes = slurp(dir / "b.pfm");
  const std::string header = "PF\n2 2\n-1.0\n";
  REQUIRE(bytes.size() == header.size() + 2 * 2 * 3 * 4);
  CHECK(bytes.substr(0, header.size()) == header);
  // First stored row is the bottom image row (y = 1).
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  CHECK(first == 100.0f);
}

TEST_CASE("single-channel pfm uses the greyscale tag and keeps NaN") {
  const auto dir = test::scratch_dir("io_pfm_gray");
  Image img(3, 2, 1, 4.5f);
  img.at(1, 1) = std::numeric_limits<float>::quiet_NaN();
  write_pfm(img, dir / "g.pfm");
  CHECK(slurp(dir / "g.pfm").substr(0, 3) == "Pf\n");
  const Image back = read_pfm(dir / "g.pfm");
  CHECK(back.channels() == 1);
  CHECK(back.at(0, 0) == 4.5f);
  CHECK(std::isnan(back.at(1, 1)));
}

TEST_CASE("corrupt pfm files are rejected") {
  const auto dir = test::scratch_dir("io_pfm_bad");
  std::ofstream(dir / "bad.pfm") << "P6\n2 2\n255\n";
  CHECK_THROWS_AS(read_pfm(dir / "bad.pfm"), DataError);
  std::ofstream(dir / "short.pfm", std::ios::binary) << "PF\n4 4\n-1.0\nabc";
  CHECK_THROWS_AS(read_pfm(dir / "short.pfm"), DataError);
  CHECK_THROWS_AS(read_pfm(dir / "missing.pfm"), DataError);
}

TEST_CASE("png round trip quantizes to 8 bits") {
  const auto dir = test::scratch_dir("io_png");
  const Image img = test::random_image(9, 4, 3, 5);
  write_image(img, dir / "a.png");
  const Image back = read_image(dir / "a.png");
  CHECK(back.same_shape(img));
  CHECK(test::max_abs_diff(back, img) <= 0.5 / 255.0 + 1e-6);
  CHECK_THROWS_AS(write_image(img, dir / "a.bmp"), DataError);
}

TEST_CASE("key value parsing") {
  const auto kv = parse_key_values("# comment\n a = 1 \n\nb=two\n");
  CHECK(kv.at("a") == "1");
  CHECK(kv.at("b") == "two");
  CHECK_THROWS_AS(parse_key_values("a = 1\na = 2\n"), DataError);
  CHECK_THROWS_AS(parse_key_values("just words\n"), DataError);
  CHECK(parse_real(" 2.5 ") == 2.5);
  CHECK_THROWS_AS(parse_real("2.5x"), DataError);
  CHECK(parse_int("-3") == -3);
  CHECK_THROWS_AS(parse_int("3.0"), DataError);
  CHECK(parse_real_list("1, 2.5,3") == std::vector<double>{1.0, 2.5, 3.0});
}

TEST_CASE("format_real round trips every double") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(parse_real(format_real(v)) == v);
  }
}

TEST_CASE("parallel_for visits every index once and propagates exceptions") {
  for (int threads : {1, 3}) {
    set_thread_count(threads);
    std::vector<int> hits(257, 0);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) {
                      if (i == 7) throw DataError("boom");
                    }),
                    DataError);
  }
  set_thread_count(0);
}
