/*
 * Copyright 2026 The refsplat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "refsplat/cli.hpp"
#include "refsplat/image.hpp"
#include "refsplat/shading.hpp"
#include "refsplat/trainer/checkpoint.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace refsplat {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(std::initializer_list<std::string> args) { return run_cli(std::vector<std::string>(args)); }

// Exit status of the real binary, so process-level codes are covered too.
int run_binary(const std::string& args) {
  const std::string cmd = std::string(REFSPLAT_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

/// Small file-based toy scene with a short training config.
fs::path make_small_toy(const std::string& name, const std::string& scene = "plane-mirror") {
  const fs::path dir = testing::scratch_dir(name);
  EXPECT_EQ(run({"--out-dir", dir.string(), "make-toy", "--scene", scene, "--size", "16", "--views", "9",
                 "--env-resolution", "8"}),
            kExitOk);
  std::ofstream cfg(dir / "train.cfg", std::ios::app);
  cfg << "total_iters = 12\nwarmup_end = 4\npbr_start = 4\nmv_start = 8\nenv_resolution = 8\n"
         "eval_interval = 6\nmv_stride = 3\n";
  return dir;
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"frobnicate"}), kExitUsage);
  EXPECT_EQ(run({"render", "--bogus"}), kExitUsage);
  EXPECT_EQ(run({"--config", "/nonexistent/x.cfg", "train"}), kExitUsage);
  EXPECT_EQ(run({"make-toy", "--scene", "teapot"}), kExitUsage);
  EXPECT_EQ(run_binary("frobnicate"), kExitUsage);
  EXPECT_EQ(run_binary("--config /nonexistent/x.cfg train"), kExitUsage);
}

TEST(Cli, HelpMatchesGoldenFile) {
  const std::string golden = slurp(fs::path(REFSPLAT_GOLDEN_DIR) / "help.txt");
  EXPECT_EQ(full_help_text(), golden);
  for (const std::string flag : {"--config", "--seed", "--threads", "--out-dir", "--checkpoint", "--cameras",
                                 "--no-trace", "--renders", "--gt", "--normals", "--gt-normals", "--view", "--scene",
                                 "--size", "--views", "--env-resolution", "--gaussians", "--inject-fault"})
    EXPECT_NE(golden.find(flag), std::string::npos) << flag;
}

TEST(Cli, GradcheckExitCodes) {
  EXPECT_EQ(run_binary("gradcheck"), kExitOk);
  EXPECT_EQ(run_binary("gradcheck --inject-fault"), kExitNumerical);
  EXPECT_EQ(run_binary("gradcheck --gaussians 0"), kExitOk);
}

TEST(Cli, TrainRenderDecomposeEval) {
  const fs::path dir = make_small_toy("cli_train");
  const fs::path out = dir / "run";
  ASSERT_EQ(run({"--config", (dir / "train.cfg").string(), "--out-dir", out.string(), "--threads", "1", "train"}),
            kExitOk);
  EXPECT_TRUE(fs::exists(out / "checkpoint.bin"));
  EXPECT_TRUE(fs::exists(out / "metrics.csv"));
  EXPECT_TRUE(fs::exists(out / "config_used.txt"));
  EXPECT_TRUE(fs::exists(out / "heldout" / "view_000.png"));
  const std::string csv = slurp(out / "metrics.csv");
  EXPECT_EQ(csv.rfind("iteration,", 0), 0u);

  const std::string ckpt = (out / "checkpoint.bin").string();
  const std::string cams = (dir / "cameras.json").string();
  ASSERT_EQ(run({"--out-dir", (dir / "r1").string(), "render", "--checkpoint", ckpt, "--cameras", cams}), kExitOk);
  ASSERT_EQ(run({"--out-dir", (dir / "r2").string(), "render", "--checkpoint", ckpt, "--cameras", cams}), kExitOk);
  EXPECT_EQ(slurp(dir / "r1" / "view_003.pfm"), slurp(dir / "r2" / "view_003.pfm"));
  EXPECT_EQ(slurp(dir / "r1" / "view_003.png"), slurp(dir / "r2" / "view_003.png"));

  ASSERT_EQ(run({"--config", (dir / "train.cfg").string(), "--out-dir", (dir / "dec").string(), "decompose",
                 "--checkpoint", ckpt, "--cameras", cams, "--view", "2"}),
            kExitOk);
  for (const std::string layer : {"diffuse_color", "metallic", "roughness", "albedo", "normal", "depth", "occlusion",
                                  "indirect", "specular", "final"})
    EXPECT_TRUE(fs::exists(dir / "dec" / ("view_002_" + layer + ".pfm"))) << layer;
  EXPECT_TRUE(fs::exists(dir / "dec" / "prior"));
  ASSERT_EQ(run({"--out-dir", (dir / "trace").string(), "trace-debug", "--checkpoint", ckpt, "--cameras", cams,
                 "--view", "1"}),
            kExitOk);
  EXPECT_TRUE(fs::exists(dir / "trace" / "view_001_occlusion.pfm"));

  EXPECT_EQ(run({"eval", "--renders", (dir / "r1").string(), "--gt", (dir / "r2").string()}), kExitOk);
}

TEST(Cli, TrainWithZeroIterationsKeepsInitialization) {
  const fs::path dir = make_small_toy("cli_zero");
  std::ofstream(dir / "train.cfg", std::ios::app) << "total_iters = 0\nwarmup_end = 0\npbr_start = 0\nmv_start = 0\n";
  ASSERT_EQ(run({"--config", (dir / "train.cfg").string(), "--out-dir", (dir / "run").string(), "train"}), kExitOk);
  const Checkpoint c = load_checkpoint((dir / "run" / "checkpoint.bin").string());
  EXPECT_EQ(c.iteration, 0);
  EXPECT_EQ(c.optimizer.gaussians.step, 0);
}

TEST(Cli, DecomposeSplitsAtZeroMetallic) {
  const fs::path dir = make_small_toy("cli_decomp");
  // Echo a constant-initialized environment and a zero-metallic model.
  Checkpoint c = load_checkpoint((dir / "truth.bin").string());
  for (std::size_t i = 0; i < c.params.count(); ++i) c.params.raw(i)[14] = -40.0;
  for (double& v : c.params.env) v = 0.25;
  save_checkpoint(c, (dir / "matte.bin").string());
  ASSERT_EQ(run({"--out-dir", (dir / "dec").string(), "decompose", "--checkpoint", (dir / "matte.bin").string(),
                 "--cameras", (dir / "cameras.json").string(), "--view", "0", "--no-trace"}),
            kExitOk);
  const Image fin = load_pfm((dir / "dec" / "view_000_final.pfm").string());
  const Image spec = load_pfm((dir / "dec" / "view_000_specular.pfm").string());
  const Image diff = load_pfm((dir / "dec" / "view_000_diffuse.pfm").string());
  const Image alpha = load_pfm((dir / "dec" / "view_000_alpha.pfm").string());
  for (std::size_t p = 0; p < fin.pixel_count(); ++p)
    if (alpha.data[p] > 0.999)
      for (int k = 0; k < 3; ++k) EXPECT_NEAR(diff.data[3 * p + k], fin.data[3 * p + k] - spec.data[3 * p + k], 1e-5);
  int faces = 0;
  for (const auto& e : fs::directory_iterator(dir / "dec")) {
    if (e.path().filename().string().rfind("env_", 0) != 0) continue;
    ++faces;
    for (double v : load_pfm(e.path().string()).data) EXPECT_NEAR(v, 0.25, 1e-6);
  }
  EXPECT_EQ(faces, kFaces);
}

TEST(Cli, EvalClosedFormAndMismatch) {
  const fs::path dir = testing::scratch_dir("cli_eval");
  fs::create_directories(dir / "a");
  fs::create_directories(dir / "b");
  save_pfm(Image(8, 8, 3, 0.5), (dir / "a" / "x.pfm").string());
  save_pfm(Image(8, 8, 3, 0.625), (dir / "b" / "x.pfm").string());
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"eval", "--renders", (dir / "a").string(), "--gt", (dir / "b").string()}), kExitOk);
  const std::string out = ::testing::internal::GetCapturedStdout();
  EXPECT_NE(out.find("x.pfm,18.0618"), std::string::npos) << out;
  save_pfm(Image(8, 8, 3, 0.5), (dir / "a" / "y.pfm").string());
  EXPECT_EQ(run({"eval", "--renders", (dir / "a").string(), "--gt", (dir / "b").string()}), kExitUsage);
}

TEST(Cli, OutputsStayInsideOutDir) {
  const fs::path dir = make_small_toy("cli_scope");
  const fs::path out = dir / "only_here";
  const auto before = std::distance(fs::directory_iterator(dir), fs::directory_iterator());
  ASSERT_EQ(run({"--config", (dir / "train.cfg").string(), "--out-dir", out.string(), "train"}), kExitOk);
  const auto after = std::distance(fs::directory_iterator(dir), fs::directory_iterator());
  EXPECT_EQ(after, before + 1);
}

}  // namespace
}  // namespace refsplat
