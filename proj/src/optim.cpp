#include "vrc/optim.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vrc {

static_assert(std::endian::native == std::endian::little,
              "checkpoint blobs are written as native little-endian doubles");

Tensor& ParamRegistry::add(const std::string& path, Shape shape) {
  if (contains(path)) throw std::invalid_argument("duplicate parameter path: " + path);
  Param p;
  p.value = Tensor::zeros(std::move(shape), true);
  p.m = Eigen::VectorXd::Zero(p.value.size());
  p.v = Eigen::VectorXd::Zero(p.value.size());
  return params_.emplace(path, std::move(p)).first->second.value;
}

Tensor& ParamRegistry::add_uniform(const std::string& path, Shape shape, Index fan_in, Rng& rng) {
  Tensor& t = add(path, std::move(shape));
  const double bound = std::sqrt(1.0 / static_cast<double>(std::max<Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Index i = 0; i < t.size(); ++i) t.mutable_values()[i] = dist(rng);
  return t;
}

const Tensor& ParamRegistry::get(const std::string& path) const {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + path);
  return it->second.value;
}

Tensor& ParamRegistry::get(const std::string& path) { return state(path).value; }

Param& ParamRegistry::state(const std::string& path) {
  auto it = params_.find(path);
  if (it == params_.end()) throw std::out_of_range("unknown parameter: " + path);
  return it->second;
}

Index ParamRegistry::parameter_count() const {
  Index n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

GradientMap ParamRegistry::gradients(const Gradients& grads) const {
  GradientMap out;
  for (const auto& [path, p] : params_) out.emplace(path, grads.of(p.value));
  return out;
}

void adam_step(ParamRegistry& registry, const GradientMap& grads, const AdamOptions& opt) {
  if (!(opt.lr > 0.0)) throw std::invalid_argument("adam_step: lr must be positive");
  for (const auto& [path, g] : grads) {
    Param& p = registry.state(path);
    if (g.size() != p.value.size()) {
      throw ShapeError("adam_step: gradient for " + path + " has " + std::to_string(g.size()) +
                       " entries, parameter has " + std::to_string(p.value.size()));
    }
    ++p.step;
    p.m = opt.beta1 * p.m + (1.0 - opt.beta1) * g;
    p.v = opt.beta2 * p.v + (1.0 - opt.beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(p.step));
    const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(p.step));
    p.value.mutable_values().array() -=
        opt.lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + opt.eps);
  }
}

double lr_schedule(long step, double base_lr, double decay, long interval) {
  if (interval <= 0) throw std::invalid_argument("lr_schedule: interval must be positive");
  return base_lr * std::pow(decay, static_cast<double>(step / interval));
}

std::filesystem::path checkpoint_prefix(const std::filesystem::path& any) {
  std::string s = any.string();
  for (const std::string suffix : {".idx.json", ".bin"}) {
    if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
      return s.substr(0, s.size() - suffix.size());
    }
  }
  return any;
}

void save_checkpoint(const ParamRegistry& registry, const std::filesystem::path& prefix) {
  nlohmann::ordered_json index = nlohmann::ordered_json::object();
  std::ofstream bin(prefix.string() + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + prefix.string() + ".bin");
  std::uint64_t offset = 0;
  for (const auto& [path, p] : registry.entries()) {
    index[path] = {{"shape", p.value.shape()}, {"offset", offset}};
    const auto& v = p.value.values();
    bin.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
    offset += static_cast<std::uint64_t>(v.size()) * sizeof(double);
  }
  std::ofstream idx(prefix.string() + ".idx.json");
  if (!idx) throw std::runtime_error("cannot write " + prefix.string() + ".idx.json");
  idx << index.dump(2) << '\n';
}

void load_checkpoint(ParamRegistry& registry, const std::filesystem::path& checkpoint) {
  const std::string prefix = checkpoint_prefix(checkpoint).string();
  const std::string idx_path = prefix + ".idx.json";
  const std::string bin_path = prefix + ".bin";
  std::ifstream idx(idx_path);
  if (!idx) throw std::runtime_error("cannot open checkpoint index " + idx_path);
  const auto index = nlohmann::json::parse(idx);
  std::ifstream bin(bin_path, std::ios::binary | std::ios::ate);
  if (!bin) throw std::runtime_error("cannot open checkpoint blob " + bin_path);
  const auto blob_size = static_cast<std::uint64_t>(bin.tellg());

  for (const auto& [path, p] : registry.entries()) {
    if (!index.contains(path)) {
      throw std::runtime_error("checkpoint " + idx_path + " lacks parameter " + path);
    }
    const auto& entry = index.at(path);
    const auto shape = entry.at("shape").get<Shape>();
    if (shape != p.value.shape()) {
      throw ShapeError("checkpoint shape " + to_string(shape) + " for " + path +
                       " does not match model shape " + to_string(p.value.shape()));
    }
    const auto offset = entry.at("offset").get<std::uint64_t>();
    const auto bytes = static_cast<std::uint64_t>(p.value.size()) * sizeof(double);
    if (offset + bytes > blob_size) {
      throw std::runtime_error("checkpoint blob " + bin_path + " truncated at " + path);
    }
    bin.seekg(static_cast<std::streamoff>(offset));
    Tensor t = p.value;
    bin.read(reinterpret_cast<char*>(t.mutable_values().data()),
             static_cast<std::streamsize>(bytes));
  }
}

}  // namespace vrc
