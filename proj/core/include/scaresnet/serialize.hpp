#pragma once

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "scaresnet/tensor.hpp"

namespace scaresnet {

namespace detail {

// data.bin holds raw values in row-major order, little-endian regardless of
// host byte order.
template <typename T>
void write_le(std::ostream& os, const std::vector<T>& values) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  for (T v : values) {
    U bits = std::bit_cast<U>(v);
    unsigned char bytes[sizeof(U)];
    for (std::size_t i = 0; i < sizeof(U); ++i)
      bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
  }
}

template <typename T>
std::vector<T> read_le(std::istream& is, std::size_t count) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::vector<T> out(count);
  unsigned char bytes[sizeof(U)];
  for (std::size_t i = 0; i < count; ++i) {
    is.read(reinterpret_cast<char*>(bytes), sizeof(U));
    if (!is) throw ValueError("tensor load: data.bin truncated");
    U bits = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b)
      bits |= static_cast<U>(bytes[b]) << (8 * b);
    out[i] = std::bit_cast<T>(bits);
  }
  return out;
}

}  // namespace detail

/// Writes a tensor as a directory: meta.json (shape, dtype, layout tag
/// "CHW-rowmajor") plus data.bin (little-endian raw values).
template <typename T>
void save_tensor(const Tensor<T>& t, const std::filesystem::path& dir,
                 nlohmann::json extra_meta = {}) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta = std::move(extra_meta);
  meta["shape"] = t.shape();
  meta["dtype"] = dtype_name<T>();
  meta["layout"] = "CHW-rowmajor";
  {
    std::ofstream mf(dir / "meta.json");
    mf << meta.dump(2) << "\n";
  }
  std::ofstream df(dir / "data.bin", std::ios::binary);
  detail::write_le(df, t.data());
}

template <typename T>
Tensor<T> load_tensor(const std::filesystem::path& dir,
                      nlohmann::json* meta_out = nullptr) {
  std::ifstream mf(dir / "meta.json");
  if (!mf) throw ValueError("tensor load: missing " + (dir / "meta.json").string());
  nlohmann::json meta = nlohmann::json::parse(mf);
  if (meta.at("dtype").get<std::string>() != dtype_name<T>())
    throw ValueError("tensor load: dtype mismatch in " + dir.string() +
                     " (expected " + dtype_name<T>() + ", found " +
                     meta.at("dtype").get<std::string>() + ")");
  if (meta.at("layout").get<std::string>() != "CHW-rowmajor")
    throw ValueError("tensor load: unsupported layout in " + dir.string());
  Shape shape = meta.at("shape").get<Shape>();
  std::ifstream df(dir / "data.bin", std::ios::binary);
  if (!df) throw ValueError("tensor load: missing " + (dir / "data.bin").string());
  auto values = detail::read_le<T>(df, numel(shape));
  if (meta_out) *meta_out = std::move(meta);
  return Tensor<T>::from(std::move(shape), std::move(values));
}

/// Checkpoint: manifest.json naming each tensor's subdirectory.
template <typename T>
void save_checkpoint(
    const std::vector<std::pair<std::string, Tensor<T>>>& named,
    const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["format"] = "scaresnet-checkpoint-v1";
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& [name, t] : named) {
    save_tensor(t, dir / name);
    tensors[name] = name;
  }
  manifest["tensors"] = tensors;
  std::ofstream mf(dir / "manifest.json");
  mf << manifest.dump(2) << "\n";
}

/// Loads checkpoint values into already-built parameters (shapes must match).
template <typename T>
void load_checkpoint(std::vector<std::pair<std::string, Tensor<T>>>& named,
                     const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf)
    throw ValueError("checkpoint load: missing " +
                     (dir / "manifest.json").string());
  nlohmann::json manifest = nlohmann::json::parse(mf);
  const auto& tensors = manifest.at("tensors");
  for (auto& [name, t] : named) {
    if (!tensors.contains(name))
      throw ValueError("checkpoint load: tensor '" + name +
                       "' absent from manifest");
    Tensor<T> loaded = load_tensor<T>(dir / tensors[name].get<std::string>());
    if (loaded.shape() != t.shape())
      throw ShapeError("checkpoint load: shape mismatch for '" + name + "': " +
                       shape_str(t.shape()) + " vs " +
                       shape_str(loaded.shape()));
    t.data() = loaded.data();
  }
}

}  // namespace scaresnet
