#pragma once

// Flat binary parameter container:
//   "DBTS1\n"
//   repeated: u32 name_len, name bytes (UTF-8), u32 rank, u32 dims[rank],
//             f32 values[prod(dims)]
// All integers and floats little-endian. The stream ends after the last entry.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "debatts/errors.hpp"
#include "debatts/nn.hpp"
#include "debatts/tensor.hpp"

namespace debatts::checkpoint {

inline constexpr char kMagic[] = "DBTS1\n";
inline constexpr std::size_t kMagicLen = 6;

struct NamedTensor {
  std::string name;
  Tensor<float> tensor;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  os.write(b, 4);
}

inline bool get_u32(std::istream& is, std::uint32_t& v) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

inline std::uint32_t require_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!get_u32(is, v)) throw ParseError(std::string("checkpoint: truncated while reading ") + what);
  return v;
}

}  // namespace detail

inline void write(std::ostream& os, const std::vector<NamedTensor>& entries) {
  os.write(kMagic, kMagicLen);
  for (const auto& e : entries) {
    detail::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    detail::put_u32(os, static_cast<std::uint32_t>(e.tensor.rank()));
    for (auto d : e.tensor.shape()) detail::put_u32(os, static_cast<std::uint32_t>(d));
    for (float f : e.tensor.values()) detail::put_u32(os, std::bit_cast<std::uint32_t>(f));
  }
  if (!os) throw DataError("checkpoint: write failed");
}

inline std::vector<NamedTensor> read(std::istream& is) {
  char magic[kMagicLen];
  if (!is.read(magic, kMagicLen) || std::memcmp(magic, kMagic, kMagicLen) != 0)
    throw ParseError("checkpoint: missing DBTS1 header");
  std::vector<NamedTensor> out;
  std::uint32_t name_len = 0;
  while (detail::get_u32(is, name_len)) {
    if (name_len > (1u << 20)) throw ParseError("checkpoint: implausible name length");
    std::string name(name_len, '\0');
    if (!is.read(name.data(), name_len)) throw ParseError("checkpoint: truncated name");
    const std::uint32_t rank = detail::require_u32(is, "rank");
    if (rank == 0) throw ParseError("checkpoint: entry '" + name + "' has rank 0");
    Shape shape(rank);
    for (auto& d : shape) d = detail::require_u32(is, "dims");
    std::vector<float> data(shape_numel(shape));
    for (auto& f : data) f = std::bit_cast<float>(detail::require_u32(is, "values"));
    out.push_back({std::move(name), Tensor<float>(std::move(shape), std::move(data))});
  }
  if (is.gcount() != 0) throw ParseError("checkpoint: truncated entry header");
  if (!is.eof()) throw ParseError("checkpoint: trailing bytes");
  return out;
}

template <class T>
std::vector<NamedTensor> collect(const ParameterSet<T>& params) {
  std::vector<NamedTensor> out;
  for (const auto& e : params.entries()) out.push_back({e.name, e.var.value().template cast<float>()});
  return out;
}

// Copies stored values into an existing parameter set. Every parameter must be
// present with a matching shape; unknown entries are rejected.
template <class T>
void assign(ParameterSet<T>& params, const std::vector<NamedTensor>& entries) {
  std::map<std::string, const Tensor<float>*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.tensor;
  if (by_name.size() != params.size())
    throw DataError("checkpoint: holds " + std::to_string(by_name.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  for (const auto& p : params.entries()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint: missing parameter '" + p.name + "'");
    if (it->second->shape() != p.var.shape())
      throw DataError("checkpoint: parameter '" + p.name + "' has shape " + shape_str(it->second->shape()) +
                      ", model expects " + shape_str(p.var.shape()));
    auto var = p.var;
    auto& dst = var.mutable_value();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>((*it->second)[i]);
  }
}

template <class T>
void save(const ParameterSet<T>& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open '" + path + "' for writing");
  write(os, collect(params));
}

template <class T>
void load(ParameterSet<T>& params, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open '" + path + "'");
  assign(params, read(is));
}

}  // namespace debatts::checkpoint
