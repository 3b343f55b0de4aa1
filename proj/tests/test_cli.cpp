#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dff/cli.hpp"
#include "dff/imageio.hpp"
#include "dff/metrics.hpp"
#include "dff/textio.hpp"
#include "support.hpp"

using namespace dff;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), dir).generic_string()] = bytes_of(e.path());
  }
  return files;
}

void pipeline(const fs::path& root) {
  const std::string r = root.string();
  REQUIRE(cli({"scene", "--out", r + "/scene", "--size", "96", "--slices", "5", "--seed", "3"}).code == 0);
  REQUIRE(cli({"simulate", "--rgb", r + "/scene/rgb.png", "--depth", r + "/scene/depth.pfm", "--camera",
               r + "/scene/camera.txt", "--out", r + "/stack", "--seed", "9"})
              .code == 0);
  REQUIRE(cli({"align", "--stack", r + "/stack", "--out", r + "/aligned", "--levels", "2"}).code == 0);
  REQUIRE(cli({"depth", "--stack", r + "/aligned", "--out", r + "/depth"}).code == 0);
  REQUIRE(cli({"eval", "--pred", r + "/depth/depth.pfm", "--gt", r + "/scene/depth.pfm", "--fmin", "300",
               "--fmax", "700", "--csv", r + "/eval.csv"})
              .code == 0);
}

}  // namespace

TEST_CASE("selftest with gradients succeeds") {
  const auto r = cli({"selftest", "--grad"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("PASS grad") != std::string::npos);
}

TEST_CASE("usage errors exit with code 1") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"selftest", "--nope"}).code == kExitUsage);
  const auto missing = cli({"eval", "--pred", "x"});
  CHECK(missing.code == kExitUsage);
  CHECK_FALSE(missing.err.empty());
  CHECK(cli({"--help"}).code == kExitOk);
}

TEST_CASE("bad data exits with code 2") {
  const auto dir = test::scratch_dir("cli_bad");
  write_text_file(dir / "junk.pfm", "not a pfm");
  const std::string j = (dir / "junk.pfm").string();
  const auto r = cli({"eval", "--pred", j, "--gt", j, "--fmin", "1", "--fmax", "2"});
  CHECK(r.code == kExitData);
  CHECK_FALSE(r.err.empty());
  write_text_file(dir / "camera.txt", "focal_length_mm = 25\n");
  write_pfm(Image(8, 8, 3, 0.5f), dir / "rgb.pfm");
  write_pfm(Image(8, 8, 1, 500.0f), dir / "d.pfm");
  CHECK(cli({"simulate", "--rgb", (dir / "rgb.pfm").string(), "--depth", (dir / "d.pfm").string(), "--camera",
             (dir / "camera.txt").string(), "--out", (dir / "out").string()})
            .code == kExitData);
}

TEST_CASE("eval of a map against itself is perfect") {
  const auto dir = test::scratch_dir("cli_eval");
  Image d(16, 16, 1, 450.0f);
  d.at(3, 3) = std::nanf("");
  write_pfm(d, dir / "d.pfm");
  const std::string p = (dir / "d.pfm").string();
  const auto r = cli({"eval", "--pred", p, "--gt", p, "--fmin", "300", "--fmax", "700", "--csv",
                      (dir / "m.csv").string(), "--name", "self"});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("self") != std::string::npos);
  const std::string csv = read_text_file(dir / "m.csv");
  CHECK(csv.find("self,0,0,0,0,0,0,0,1,1,1,255") != std::string::npos);
  CHECK(fs::exists(dir / "m.csv.manifest.txt"));
}

TEST_CASE("pipeline outputs are complete, reproducible and leave inputs alone") {
  const auto a = test::scratch_dir("cli_pipe_a");
  const auto b = test::scratch_dir("cli_pipe_b");
  pipeline(a);
  for (const char* f : {"stack/manifest.txt", "stack/truth.txt", "stack/metadata.txt", "stack/camera.txt",
                        "aligned/align_report.txt", "aligned/manifest.txt", "depth/depth.pfm",
                        "depth/confidence.pfm", "depth/all_in_focus.png", "depth/manifest.txt", "eval.csv"}) {
    INFO(f);
    CHECK(fs::exists(a / f));
  }
  const std::string manifest = read_text_file(a / "stack/manifest.txt");
  CHECK(manifest.find("subcommand = simulate") != std::string::npos);
  CHECK(manifest.find("seed = 9") != std::string::npos);

  const auto before = snapshot(a / "scene");
  pipeline(b);
  CHECK(snapshot(a / "scene") == before);
  // Paths differ between the two runs; everything except the manifests must match byte for byte.
  auto sa = snapshot(a), sb = snapshot(b);
  REQUIRE(sa.size() == sb.size());
  for (const auto& [name, data] : sa) {
    INFO(name);
    if (name.find("manifest") != std::string::npos) continue;
    CHECK(sb.at(name) == data);
  }

  DepthMap pred{read_pfm(a / "depth/depth.pfm"), Image(), Mask()};
  const Image gt = read_pfm(a / "scene/depth.pfm");
  pred.valid = Mask(gt.width(), gt.height(), true);
  for (int y = 0; y < gt.height(); ++y)
    for (int x = 0; x < gt.width(); ++x) {
      const float v = pred.depth_mm.at(x, y);
      if (!std::isfinite(v)) continue;
      CHECK(v >= 300.0f);
      CHECK(v <= 700.0f);
    }
}

TEST_CASE("installed executable reports exit codes") {
  const std::string exe = DFFLAB_EXE;
  CHECK(std::system((exe + " selftest > /dev/null 2>&1").c_str()) == 0);
  const int bad = std::system((exe + " frobnicate > /dev/null 2>&1").c_str());
  CHECK(WEXITSTATUS(bad) == 1);
}
