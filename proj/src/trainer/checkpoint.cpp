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

#include "refsplat/trainer/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace refsplat {

namespace {

constexpr char kMagic[8] = {'R', 'S', 'P', 'L', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw InputError("cannot write checkpoint: " + path);
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_vector(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  void finish() {
    out_.flush();
    if (!out_) throw InputError("failed writing checkpoint: " + path_);
  }
  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
  std::string path_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw InputError("cannot open checkpoint: " + path);
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw InputError("truncated checkpoint: " + path_);
    return v;
  }
  std::vector<double> get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > (1ull << 34)) throw InputError("corrupt checkpoint: " + path_);
    std::vector<double> v(n);
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in_) throw InputError("truncated checkpoint: " + path_);
    return v;
  }
  std::ifstream& stream() { return in_; }

 private:
  std::ifstream in_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  Writer w(path);
  w.stream().write(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::int64_t>(c.iteration);
  for (int k = 0; k < 3; ++k) w.put<double>(c.background[k]);
  w.put<std::uint32_t>(kRawPerGaussian);
  w.put<std::int32_t>(c.params.env_resolution);
  w.put_vector(c.params.gaussians);
  w.put_vector(c.params.env);
  w.put<std::int64_t>(c.optimizer.gaussians.step);
  w.put_vector(c.optimizer.gaussians.m);
  w.put_vector(c.optimizer.gaussians.v);
  w.put<std::int64_t>(c.optimizer.environment.step);
  w.put_vector(c.optimizer.environment.m);
  w.put_vector(c.optimizer.environment.v);
  w.finish();
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.stream().read(magic, sizeof(magic));
  if (!r.stream() || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw InputError("not a checkpoint file: " + path);
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw InputError("checkpoint version mismatch: file has " + std::to_string(version) + ", expected " +
                     std::to_string(kCheckpointVersion));
  Checkpoint c;
  c.iteration = static_cast<long>(r.get<std::int64_t>());
  for (int k = 0; k < 3; ++k) c.background[k] = r.get<double>();
  if (r.get<std::uint32_t>() != kRawPerGaussian) throw InputError("checkpoint layout mismatch: " + path);
  c.params.env_resolution = r.get<std::int32_t>();
  c.params.gaussians = r.get_vector();
  c.params.env = r.get_vector();
  const std::size_t env_expected = static_cast<std::size_t>(kFaces) * c.params.env_resolution * c.params.env_resolution * 3;
  if (c.params.gaussians.size() % kRawPerGaussian != 0 || c.params.env.size() != env_expected)
    throw InputError("corrupt checkpoint: " + path);
  c.optimizer.gaussians.step = r.get<std::int64_t>();
  c.optimizer.gaussians.m = r.get_vector();
  c.optimizer.gaussians.v = r.get_vector();
  c.optimizer.environment.step = r.get<std::int64_t>();
  c.optimizer.environment.m = r.get_vector();
  c.optimizer.environment.v = r.get_vector();
  return c;
}

}  // namespace refsplat
