// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/checkpoint.hpp"

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "resfit/errors.hpp"
#include "resfit/rng.hpp"

namespace resfit {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'T', '1'};

// All multi-byte values are little-endian on disk.
void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }

  std::uint8_t u8(const char* what, int layer = -1) {
    require(1, what, layer);
    return bytes_[pos_++];
  }

  std::uint32_t u32(const char* what, int layer = -1) {
    require(4, what, layer);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(bytes_[pos_++]) << (8 * i);
    return v;
  }

  double f64(const char* what, int layer = -1) {
    require(8, what, layer);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(bytes_[pos_++]) << (8 * i);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  }

  void fill_f64(std::vector<double>& dst, const char* what, int layer) {
    for (double& x : dst) x = f64(what, layer);
  }

 private:
  void require(std::size_t n, const char* what, int layer) {
    if (!has(n)) {
      std::string msg = std::string("checkpoint stream truncated while reading ") + what;
      if (layer >= 0) msg += " of layer " + std::to_string(layer);
      throw TruncatedStreamError(msg, layer);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_params(const MlpParams& params, const MlpSpec& spec) {
  spec.validate();
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(spec.input_dim));
  put_u32(out, static_cast<std::uint32_t>(spec.output_dim));
  put_u32(out, static_cast<std::uint32_t>(spec.hidden_dims.size()));
  for (std::size_t h : spec.hidden_dims) put_u32(out, static_cast<std::uint32_t>(h));
  out.push_back(static_cast<std::uint8_t>(spec.hidden_activation));
  out.push_back(static_cast<std::uint8_t>(spec.output_activation));
  for (std::uint8_t f : spec.layernorm) out.push_back(f ? 1 : 0);

  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    for (double w : params.weights[l].values()) put_f64(out, w);
    for (double b : params.biases[l]) put_f64(out, b);
    if (spec.layer_has_layernorm(l)) {
      for (double g : params.ln_gains[l]) put_f64(out, g);
      for (double o : params.ln_offsets[l]) put_f64(out, o);
    }
  }
  return out;
}

std::pair<MlpParams, MlpSpec> deserialize_params(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw VersionMismatchError("checkpoint magic is not RFT1");
  }
  Reader r(bytes);
  r.u32("magic");  // skip; already validated

  MlpSpec spec;
  spec.input_dim = r.u32("input_dim");
  spec.output_dim = r.u32("output_dim");
  const std::uint32_t hidden = r.u32("hidden layer count");
  spec.hidden_dims.resize(hidden);
  for (std::uint32_t i = 0; i < hidden; ++i) spec.hidden_dims[i] = r.u32("hidden dim");
  spec.hidden_activation = static_cast<Activation>(r.u8("hidden activation"));
  spec.output_activation = static_cast<OutputActivation>(r.u8("output activation"));
  spec.layernorm.resize(hidden);
  for (std::uint32_t i = 0; i < hidden; ++i) spec.layernorm[i] = r.u8("layernorm flag");
  spec.validate();

  MlpParams params = MlpParams::zeros(spec);
  for (std::size_t l = 0; l < spec.num_layers(); ++l) {
    const int li = static_cast<int>(l);
    r.fill_f64(params.weights[l].values(), "weights", li);
    r.fill_f64(params.biases[l], "biases", li);
    if (spec.layer_has_layernorm(l)) {
      r.fill_f64(params.ln_gains[l], "layernorm gain", li);
      r.fill_f64(params.ln_offsets[l], "layernorm offset", li);
    }
  }
  return {std::move(params), std::move(spec)};
}

void atomic_write_file(const std::filesystem::path& path, const void* data,
                       std::size_t len) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    if (len > 0 && std::fwrite(data, 1, len, f) != len) {
      std::fclose(f);
      throw Error("short write to " + tmp.string());
    }
    std::fflush(f);
    std::fclose(f);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("rename " + tmp.string() + " -> " + path.string() + " failed");
}

void atomic_write_file(const std::filesystem::path& path, const std::string& text) {
  atomic_write_file(path, text.data(), text.size());
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::string read_file_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void save_params_file(const std::filesystem::path& path, const MlpParams& params,
                      const MlpSpec& spec) {
  const std::vector<std::uint8_t> bytes = serialize_params(params, spec);
  atomic_write_file(path, bytes.data(), bytes.size());
}

std::pair<MlpParams, MlpSpec> load_params_file(const std::filesystem::path& path) {
  return deserialize_params(read_file_bytes(path));
}

std::string content_hash(const void* data, std::size_t len) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a:%016llx",
                static_cast<unsigned long long>(fnv1a64(data, len)));
  return buf;
}

std::string content_hash(const std::vector<std::uint8_t>& bytes) {
  return content_hash(bytes.data(), bytes.size());
}

std::string file_content_hash(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return content_hash(bytes);
}

}  // namespace resfit
