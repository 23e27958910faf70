#pragma once

#include <doctest.h>

#include "oracles.hpp"

#include <filesystem>

namespace test {

// Empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("vrc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// 64-point partials, 64-point output: steps take milliseconds.
inline vrc::VRCNetConfig tiny_vrcnet() {
  vrc::VRCNetConfig c;
  c.pmnet.latent = 4;
  c.pmnet.feature = 16;
  c.pmnet.coarse_n = 16;
  c.pmnet.stage1 = {8, 8};
  c.pmnet.stage2 = {16};
  c.pmnet.decoder_hidden = 16;
  c.renet.channels = {8, 8, 8};
  c.renet.pool_ratios = {0.5, 0.5};
  c.renet.pool_k = {2, 2};
  c.renet.branch_ks = {2, 4};
  c.renet.c_mid = 4;
  c.renet.code_width = 4;
  c.renet.output_n = 64;
  return c;
}

// Resolutions {64, 128, 256, 512}, partials of 64 points, 26 views per shape.
inline vrc::DatasetOptions tiny_options(vrc::DatasetMode mode = vrc::DatasetMode::mvp) {
  vrc::DatasetOptions o;
  o.mode = mode;
  o.divisor = 32;
  return o;
}

inline vrc::Dataset tiny_dataset(const std::vector<vrc::ShapeFamily>& families,
                                 std::uint64_t seed = 3,
                                 vrc::DatasetMode mode = vrc::DatasetMode::mvp,
                                 double test_fraction = 0.0) {
  std::vector<vrc::ShapeSpec> specs;
  for (auto f : families) specs.push_back(vrc::default_shape(f));
  auto o = tiny_options(mode);
  o.test_fraction = test_fraction;
  return vrc::build_dataset(specs, o, seed);
}

}  // namespace test
