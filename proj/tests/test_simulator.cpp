#include <doctest.h>

#include "dff/parallel.hpp"
#include "dff/scene.hpp"
#include "dff/simulator.hpp"
#include "dff/textio.hpp"
#include "support.hpp"

using namespace dff;

namespace {

CameraConfig small_camera() { return CameraConfig(25.0, 6.4, 2.0, 500.0, 64, 64, {700.0, 500.0, 350.0}); }

// Object distance, nearer than slice n's focus, whose blur circle is `coc_px`.
double depth_for_coc(const CameraConfig& cam, std::size_t n, double coc_px) {
  const double sn = sensor_distance(cam, n);
  const double c_mm = coc_px * cam.sensor_width_mm() / cam.image_width_px();
  const double D = cam.aperture_diameter_mm();
  const double sp = D * sn / (D - c_mm);
  return cam.focal_length_mm() * sp / (sp - cam.focal_length_mm());
}

// Disc of the given diameter integrated over each pixel by fine supersampling.
std::vector<double> dense_disc(double diameter, int radius) {
  const int n = 2 * radius + 1;
  const int ss = 64;
  std::vector<double> k(static_cast<std::size_t>(n) * n, 0.0);
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      int in = 0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b) {
          const double px = dx - 0.5 + (b + 0.5) / ss, py = dy - 0.5 + (a + 0.5) / ss;
          in += px * px + py * py <= diameter * diameter / 4.0;
        }
      k[(dy + radius) * n + dx + radius] = in;
      total += in;
    }
  }
  for (double& v : k) v /= total;
  return k;
}

}  // namespace

TEST_CASE("depth helper lands on the requested blur") {
  const auto cam = small_camera();
  CHECK(coc_diameter_px(cam, 1, depth_for_coc(cam, 1, 9.0)) == doctest::Approx(9.0).epsilon(1e-10));
}

TEST_CASE("single point spreads into a disc matching a dense convolution") {
  const auto cam = small_camera();
  Image rgb(64, 64, 3, 0.0f);
  for (int c = 0; c < 3; ++c) rgb.at(32, 32, c) = 1.0f;
  const Image depth(64, 64, 1, static_cast<float>(depth_for_coc(cam, 1, 9.0)));
  const FocalSlice s = render_slice(rgb, depth, cam, 1);
  const int R = 6;
  const auto oracle = dense_disc(9.0, R);
  double total = 0.0, l1 = 0.0;
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const double v = s.pixels.at(x, y, 1);
      total += v;
      const int dx = x - 32, dy = y - 32;
      const double o = (std::abs(dx) <= R && std::abs(dy) <= R) ? oracle[(dy + R) * (2 * R + 1) + dx + R] : 0.0;
      l1 += std::abs(v - o);
      if (dx * dx + dy * dy > 36) CHECK(v == 0.0f);
    }
  }
  CHECK(std::abs(total - 1.0) < 1e-4);
  CHECK(l1 < 0.02);
  CHECK(s.pixels.at(32, 32, 0) == doctest::Approx(oracle[R * (2 * R + 1) + R]).epsilon(0.05));
}

TEST_CASE("constant image survives any depth layout") {
  const auto cam = small_camera();
  const Image rgb(64, 64, 3, 0.5f);
  SceneParams p;
  p.width = p.height = 64;
  const Scene sc = textured_scene(p);
  for (std::size_t n = 0; n < cam.slice_count(); ++n) {
    const auto s = render_slice(rgb, sc.depth_mm, cam, n);
    for (float v : s.pixels.data()) CHECK(std::abs(v - 0.5f) <= 1e-6f);
  }
}

TEST_CASE("a plane at the focus distance renders unchanged") {
  const auto cam = small_camera();
  const Image rgb = test::random_image(64, 64, 3, 4);
  const Image depth(64, 64, 1, 500.0f);
  CHECK(render_slice(rgb, depth, cam, 1).pixels.data() == rgb.data());
}

TEST_CASE("blur stays local") {
  const auto cam = small_camera();
  Image rgb(64, 64, 3, 0.0f);
  rgb.at(10, 10, 0) = 1.0f;
  const double d = depth_for_coc(cam, 1, 5.0);
  const auto s = render_slice(rgb, Image(64, 64, 1, float(d)), cam, 1);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (std::hypot(x - 10, y - 10) > 4.0) CHECK(s.pixels.at(x, y, 0) == 0.0f);
}

TEST_CASE("blur grows with distance from the focus plane") {
  const auto cam = small_camera();
  Image rgb(64, 64, 1, 0.0f);
  for (int y = 0; y < 64; ++y)
    for (int x = 32; x < 64; ++x) rgb.at(x, y) = 1.0f;
  // L1 distance from the sharp step grows linearly with the blur radius.
  auto edge_width = [&](double depth) {
    const auto s = render_slice(rgb, Image(64, 64, 1, float(depth)), cam, 1);
    double w = 0.0;
    for (int x = 8; x < 56; ++x) w += std::abs(s.pixels.at(x, 32) - rgb.at(x, 32));
    return w;
  };
  CHECK(edge_width(500.0) == 0.0);
  CHECK(edge_width(650.0) < edge_width(900.0));
  CHECK(edge_width(450.0) < edge_width(380.0));
}

TEST_CASE("invalid inputs are rejected") {
  const auto cam = small_camera();
  const Image rgb(8, 8, 3, 0.2f);
  CHECK_THROWS_AS(render_slice(rgb, Image(8, 8, 1, 20.0f), cam, 0), DataError);
  CHECK_THROWS_AS(render_slice(rgb, Image(8, 7, 1, 600.0f), cam, 0), DataError);
  Image bad(8, 8, 1, 600.0f);
  bad.at(3, 3) = std::nanf("");
  CHECK_THROWS_AS(render_slice(rgb, bad, cam, 0), DataError);
  CHECK_THROWS_AS(render_slice(rgb, Image(8, 8, 1, 600.0f), cam, 5), DataError);
  ErrorModel em;
  em.translation_err_range_px = {1.0, -1.0};
  CHECK_THROWS_AS(sample_error(em, 0), DataError);
}

TEST_CASE("error samples are deterministic and in range") {
  ErrorModel em;
  em.seed = 77;
  for (std::size_t i = 0; i < 50; ++i) {
    const auto a = sample_error(em, i);
    CHECK(a == sample_error(em, i));
    CHECK(std::abs(a.alpha) <= 0.005);
    CHECK(std::abs(a.beta) <= 2.0);
    CHECK(std::abs(a.gamma) <= 2.0);
  }
  ErrorModel other = em;
  other.seed = 78;
  CHECK_FALSE(sample_error(em, 1) == sample_error(other, 1));
}

TEST_CASE("stacks are bit identical for a fixed seed regardless of threads") {
  SceneParams p;
  p.width = p.height = 64;
  const Scene sc = textured_scene(p);
  const auto cam = preset_camera(64, 64, 4);
  ErrorModel em;
  em.seed = 5;
  set_thread_count(1);
  const auto a = render_stack(sc.rgb, sc.depth_mm, cam, em);
  set_thread_count(3);
  const auto b = render_stack(sc.rgb, sc.depth_mm, cam, em);
  set_thread_count(1);
  REQUIRE(a.stack.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.stack.slices[i].pixels.data() == b.stack.slices[i].pixels.data());
    CHECK(a.total_truth[i] == b.total_truth[i]);
  }
  CHECK(a.stack.target_index == 3);
  CHECK(a.residual_truth[3] == BasisCoefficients{});
  CHECK(a.total_truth[3] == BasisCoefficients{});
  for (std::size_t i = 0; i < 3; ++i) {
    const auto expect = compose(scale_only(lens_states(cam)[i].relative_fov), a.residual_truth[i]);
    CHECK(a.total_truth[i] == expect);
  }
}

TEST_CASE("breathing only stack shrinks the view of wide slices") {
  SceneParams p;
  p.width = p.height = 64;
  const Scene sc = textured_scene(p);
  const auto cam = preset_camera(64, 64, 3);
  const auto sim = render_stack(sc.rgb, sc.depth_mm, cam, std::nullopt);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(sim.residual_truth[i] == BasisCoefficients{});
    CHECK(sim.total_truth[i].alpha == doctest::Approx(lens_states(cam)[i].relative_fov - 1.0));
  }
}

TEST_CASE("stack save and load round trip") {
  SceneParams p;
  p.width = p.height = 32;
  const Scene sc = textured_scene(p);
  const auto cam = preset_camera(32, 32, 3);
  ErrorModel em;
  em.seed = 3;
  const auto sim = render_stack(sc.rgb, sc.depth_mm, cam, em);
  const auto dir = test::scratch_dir("sim_roundtrip");
  save_stack(sim.stack, dir, SliceFormat::kPfm);
  const FocalStack back = load_stack(dir);
  REQUIRE(back.size() == 3);
  CHECK(back.target_index == sim.stack.target_index);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back.slices[i].pixels.data() == sim.stack.slices[i].pixels.data());
    CHECK(back.slices[i].valid.data() == sim.stack.slices[i].valid.data());
    CHECK(back.slices[i].focus_distance_mm == sim.stack.slices[i].focus_distance_mm);
    CHECK(back.slices[i].relative_fov == doctest::Approx(sim.stack.slices[i].relative_fov).epsilon(1e-12));
  }
  write_text_file(dir / "metadata.txt", "0, 700, 15.5, 15.5\n2, 500, 15.5, 15.5\n");
  CHECK_THROWS_AS(load_stack(dir), DataError);
}
