#pragma once

// Checkpoint format: <stem>.json manifest + <stem>.bin blob.
//
//   {
//     "format": "freqdoor-checkpoint", "version": 1,
//     "dtype": "float32", "byte_order": "little",
//     "blob": "<stem>.bin", "blob_bytes": N,
//     "tensors": [{"name": ..., "shape": [c, h, w], "offset": bytes}, ...],
//     "meta": {...}
//   }
//
// Tensors are packed back to back in manifest order. Loaders reject any
// manifest whose declared extents disagree with the blob length.

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqdoor/params.hpp"

namespace freqdoor {

using json = nlohmann::json;

inline std::string sha256_hex(const void* data, std::size_t n) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, n, md, &len, EVP_sha256(), nullptr) != 1) throw Error("sha256 failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string sha256_hex(const std::string& s) { return sha256_hex(s.data(), s.size()); }

inline std::vector<char> read_file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open: " + p.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), {});
}

inline void write_file_bytes(const std::filesystem::path& p, const void* data, std::size_t n) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write: " + p.string());
  out.write(static_cast<const char*>(data), std::streamsize(n));
  if (!out) throw IoError("write failed: " + p.string());
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  write_file_bytes(p, s.data(), s.size());
}

inline std::string read_text(const std::filesystem::path& p) {
  auto b = read_file_bytes(p);
  return std::string(b.begin(), b.end());
}

namespace detail {
inline void put_f32_le(std::vector<unsigned char>& out, float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xFF));
}
inline float get_f32_le(const unsigned char* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= std::uint32_t(p[i]) << (8 * i);
  float v;
  std::memcpy(&v, &u, 4);
  return v;
}
}  // namespace detail

struct Checkpoint {
  ParamSet<float> params;
  json meta;
  std::string blob_sha256;
};

/// Writes <stem>.json and <stem>.bin; returns the manifest path.
template <class T>
std::filesystem::path save_checkpoint(const ParamSet<T>& ps, const json& meta, const std::filesystem::path& stem) {
  std::vector<unsigned char> blob;
  json tensors = json::array();
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto& t = ps[i];
    tensors.push_back({{"name", ps.name(i)},
                       {"shape", {t.channels(), t.height(), t.width()}},
                       {"offset", blob.size()}});
    for (std::size_t j = 0; j < t.size(); ++j) detail::put_f32_le(blob, static_cast<float>(t[j]));
  }
  auto bin = stem;
  bin += ".bin";
  auto man = stem;
  man += ".json";
  json m = {{"format", "freqdoor-checkpoint"},
            {"version", 1},
            {"dtype", "float32"},
            {"byte_order", "little"},
            {"blob", bin.filename().string()},
            {"blob_bytes", blob.size()},
            {"blob_sha256", sha256_hex(blob.data(), blob.size())},
            {"tensors", tensors},
            {"meta", meta}};
  write_file_bytes(bin, blob.data(), blob.size());
  write_text(man, m.dump(2) + "\n");
  return man;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& manifest_path) {
  json m;
  try {
    m = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint manifest " + manifest_path.string() + ": " + e.what());
  }
  auto fail = [&](const std::string& why) { throw IoError("checkpoint " + manifest_path.string() + ": " + why); };
  if (m.value("format", "") != "freqdoor-checkpoint") fail("unknown format");
  if (m.value("dtype", "") != "float32" || m.value("byte_order", "") != "little") fail("unsupported encoding");
  const auto blob_path = manifest_path.parent_path() / m.at("blob").get<std::string>();
  const auto raw = read_file_bytes(blob_path);
  const auto* bytes = reinterpret_cast<const unsigned char*>(raw.data());
  if (m.at("blob_bytes").get<std::size_t>() != raw.size()) fail("declared blob_bytes disagrees with blob length");

  Checkpoint ck;
  std::size_t expected_offset = 0;
  for (const auto& t : m.at("tensors")) {
    const auto shape = t.at("shape").get<std::vector<int>>();
    if (shape.size() != 3) fail("tensor shape must have 3 dims");
    const Shape s{shape[0], shape[1], shape[2]};
    const auto off = t.at("offset").get<std::size_t>();
    if (off != expected_offset) fail("tensor offsets are not contiguous");
    const std::size_t nbytes = s.size() * 4;
    if (off + nbytes > raw.size()) fail("tensor extends past end of blob");
    auto idx = ck.params.add(t.at("name").get<std::string>(), s);
    auto& dst = ck.params[idx];
    for (std::size_t j = 0; j < s.size(); ++j) dst[j] = detail::get_f32_le(bytes + off + 4 * j);
    expected_offset = off + nbytes;
  }
  if (expected_offset != raw.size()) fail("declared tensor sizes disagree with blob length");
  ck.meta = m.value("meta", json::object());
  ck.blob_sha256 = sha256_hex(raw.data(), raw.size());
  return ck;
}

}  // namespace freqdoor
