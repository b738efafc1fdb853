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

// Parallel kernels against their serial references on a toy view. Thread
// count follows OMP_NUM_THREADS.

#include "refsplat/multiview.hpp"
#include "refsplat/reference.hpp"
#include "refsplat/toy_scenes.hpp"

#include <benchmark/benchmark.h>

#include <map>

namespace refsplat {
namespace {

struct Fixture {
  ToyScene scene;
  GBuffer gbuffer;
  DiskBVH bvh;
  IncidentMaps incident;

  explicit Fixture(int size) : scene(make_toy_scene("occluder-box", {.image_size = size, .views = 4})) {
    gbuffer = splat_forward(scene.gaussians, scene.cameras[0]);
    bvh = DiskBVH::build(scene.gaussians);
    incident = trace_image(scene.gaussians, bvh, gbuffer, scene.cameras[0]);
  }
};

const Fixture& fixture(int size) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(size);
  if (it == cache.end()) it = cache.emplace(size, Fixture(size)).first;
  return it->second;
}

void BM_SplatForward(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(splat_forward(f.scene.gaussians, f.scene.cameras[0]));
}

void BM_SplatForwardReference(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::splat_forward(f.scene.gaussians, f.scene.cameras[0]));
}

void BM_TraceImage(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(trace_image(f.scene.gaussians, f.bvh, f.gbuffer, f.scene.cameras[0]));
}

void BM_TraceImageReference(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(reference::trace_image(f.scene.gaussians, f.gbuffer, f.scene.cameras[0]));
}

void BM_DeferredShade(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        deferred_shade(f.gbuffer, f.scene.cameras[0], f.scene.environment, shared_dfg(), f.incident));
}

void BM_DeferredShadeReference(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state)
    benchmark::DoNotOptimize(
        reference::deferred_shade(f.gbuffer, f.scene.cameras[0], f.scene.environment, shared_dfg(), f.incident));
}

void BM_LuminanceNormalize(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(luminance_normalize(f.scene.images[0]));
}

void BM_LuminanceNormalizeReference(benchmark::State& state) {
  const Fixture& f = fixture(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reference::luminance_normalize(f.scene.images[0]));
}

BENCHMARK(BM_SplatForward)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SplatForwardReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TraceImage)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TraceImageReference)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeferredShade)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_DeferredShadeReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LuminanceNormalize)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LuminanceNormalizeReference)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace refsplat

BENCHMARK_MAIN();
