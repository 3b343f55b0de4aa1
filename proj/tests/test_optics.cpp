#include <doctest.h>

#include <random>

#include "dff/optics.hpp"
#include "dff/image.hpp"

using namespace dff;

namespace {
// Gaussian lens equation in reciprocal form: 1/s = 1/f - 1/F.
double reciprocal_image_distance(double f, double F) { return 1.0 / (1.0 / f - 1.0 / F); }

CameraConfig cam50(std::vector<double> schedule, double fnum = 2.0) {
  return CameraConfig(50.0, 36.0, fnum, 1000.0, 1024, 768, std::move(schedule));
}
}  // namespace

TEST_CASE("sensor distance matches the reciprocal lens equation") {
  const auto cam = cam50({1000.0, 2000.0});
  CHECK(sensor_distance(cam, 1) == doctest::Approx(reciprocal_image_distance(50, 2000)).epsilon(1e-12));
  CHECK(sensor_distance(cam, 0) == doctest::Approx(reciprocal_image_distance(50, 1000)).epsilon(1e-12));
  CHECK(sensor_distance(cam, 1) == doctest::Approx(51.28205128205128).epsilon(1e-10));
  CHECK(sensor_distance(cam, 0) == doctest::Approx(52.63157894736842).epsilon(1e-10));
  CHECK_THROWS_AS(sensor_distance(cam, 2), DataError);
}

TEST_CASE("sensor distance approaches the focal length for distant focus") {
  CHECK(std::abs(image_distance(50.0, 1e9) - 50.0) < 1e-4);
  double prev = image_distance(50.0, 51.0);
  for (double F = 60.0; F < 1e7; F *= 1.7) {
    const double s = image_distance(50.0, F);
    CHECK(s < prev);
    CHECK(s > 50.0);
    prev = s;
  }
}

TEST_CASE("two-slice relative field of view") {
  const auto cam = cam50({1000.0, 2000.0});
  const auto st = lens_states(cam);
  CHECK(target_index(cam) == 0);
  CHECK(st[0].relative_fov == 1.0);
  // (50000/950) / (100000/1950) = 1.0263157894736842
  CHECK(st[1].relative_fov == doctest::Approx(1.0263157894736842).epsilon(1e-12));
  CHECK(st[0].fov_mm == doctest::Approx(1000.0 * 36.0 / st[0].sensor_distance_mm));
}

TEST_CASE("single slice is its own target") {
  const auto st = lens_states(cam50({1500.0}));
  REQUIRE(st.size() == 1);
  CHECK(st[0].relative_fov == 1.0);
}

TEST_CASE("invalid schedules are rejected at construction") {
  CHECK_THROWS_AS(cam50({1000.0, 1000.0}), DataError);
  CHECK_THROWS_AS(cam50({1000.0, 2000.0, 1500.0}), DataError);
  CHECK_THROWS_AS(cam50({}), DataError);
  CHECK_THROWS_AS(cam50({40.0, 100.0}), DataError);
  CHECK_THROWS_AS(cam50({50.0}), DataError);
  CHECK_THROWS_AS(CameraConfig(50.0, 0.0, 2.0, 1.0, 10, 10, {100.0}), DataError);
  CHECK_THROWS_AS(CameraConfig(50.0, 36.0, -1.0, 1.0, 10, 10, {100.0}), DataError);
  CHECK_THROWS_AS(CameraConfig(50.0, 36.0, 2.0, 1.0, 0, 10, {100.0}), DataError);
  CHECK_NOTHROW(cam50({3000.0, 2000.0, 1000.0}));
}

TEST_CASE("circle of confusion against the magnification form") {
  // Independent form: c = D f |F_p - F_n| / (F_p (F_n - f)).
  const auto cam = cam50({1000.0});
  const double D = 25.0;
  const double oracle_mm = D * 50.0 * (2000.0 - 1000.0) / (2000.0 * (1000.0 - 50.0));
  CHECK(oracle_mm == doctest::Approx(25.0 / 38.0).epsilon(1e-14));
  const double px = coc_diameter_px(cam, 0, 2000.0);
  CHECK(px == doctest::Approx(oracle_mm * 1024.0 / 36.0).epsilon(1e-12));
  CHECK(px == doctest::Approx(18.71345029239766).epsilon(1e-10));
  CHECK(coc_diameter_px(cam, 0, 1000.0) == 0.0);
  CHECK_THROWS_AS(coc_diameter_px(cam, 0, 50.0), DataError);
  CHECK_THROWS_AS(coc_diameter_px(cam, 0, 20.0), DataError);
}

TEST_CASE("doubling the f-number halves the blur") {
  const auto a = cam50({800.0}, 2.0);
  const auto b = cam50({800.0}, 4.0);
  for (double d : {300.0, 650.0, 1200.0, 5000.0}) {
    CHECK(coc_diameter_px(b, 0, d) == doctest::Approx(0.5 * coc_diameter_px(a, 0, d)).epsilon(1e-12));
  }
}

TEST_CASE("blur is zero only at the focus distance and grows away from it") {
  const auto cam = cam50({900.0});
  double prev = coc_diameter_px(cam, 0, 60.0);
  for (double d = 61.0; d < 900.0; d += 7.0) {
    const double c = coc_diameter_px(cam, 0, d);
    CHECK(c < prev);
    CHECK(c > 0.0);
    prev = c;
  }
  prev = 0.0;
  for (double d = 901.0; d < 1e6; d *= 1.3) {
    const double c = coc_diameter_px(cam, 0, d);
    CHECK(c > prev);
    prev = c;
  }
}

TEST_CASE("lens state invariants on random configurations") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double f = 4.0 + 80.0 * u(rng);
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<double> sched;
    double F = f * (1.5 + 20.0 * u(rng));
    for (int i = 0; i < n; ++i) {
      sched.push_back(F);
      F *= 1.01 + u(rng);
    }
    if (u(rng) < 0.5) std::reverse(sched.begin(), sched.end());
    const CameraConfig cam(f, 2.0 + 30.0 * u(rng), 1.4 + 10 * u(rng), 100.0 + 1000.0 * u(rng), 640, 480, sched);
    const auto st = lens_states(cam);
    int ones = 0;
    const double wa = cam.work_distance_mm() * cam.sensor_width_mm();
    for (std::size_t i = 0; i < st.size(); ++i) {
      CHECK(st[i].sensor_distance_mm > f);
      CHECK(st[i].relative_fov >= 1.0);
      if (st[i].relative_fov == 1.0) ++ones;
      CHECK(std::abs(st[i].fov_mm * st[i].sensor_distance_mm - wa) <= 1e-9 * wa);
    }
    CHECK(ones == 1);
    CHECK(st[target_index(cam)].relative_fov == 1.0);
  }
}

TEST_CASE("camera config text round trip") {
  const CameraConfig cam(25.0, 6.4, 4.0, 500.0, 256, 192, {700.0, 655.5, 300.125});
  const std::string text = format_camera_config(cam);
  for (const char* key : {"focal_length_mm", "sensor_width_mm", "f_number", "work_distance_mm", "image_width_px",
                          "image_height_px", "focus_schedule_mm"}) {
    CHECK(text.find(key) != std::string::npos);
  }
  const CameraConfig back = parse_camera_config(text);
  CHECK(back.focal_length_mm() == 25.0);
  CHECK(back.image_height_px() == 192);
  CHECK(back.focus_schedule_mm() == cam.focus_schedule_mm());
  CHECK_THROWS_AS(parse_camera_config("focal_length_mm = 25\n"), DataError);
}
