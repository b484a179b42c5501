#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "bacon/errors.hpp"
#include "bacon/network.hpp"
#include "json.hpp"

// Checkpoint layout (all integers little-endian):
//   8 bytes   magic "BACONCKP"
//   u32       format version (1)
//   u64       header length in bytes
//   header    UTF-8 JSON: {"endianness":"little", "spec":{...},
//             "tensors":[{"name","dtype","shape":[rows,cols],"offset"}...]}
//   payload   tensors back to back, row-major, IEEE-754 little-endian
// Offsets are relative to the start of the payload.
namespace bacon::network {

inline void to_json(nlohmann::json& j, const NetworkSpec& s) {
  j = nlohmann::json{{"input_dim", s.input_dim},
                     {"hidden_dim", s.hidden_dim},
                     {"num_sine_layers", s.num_sine_layers},
                     {"output_dim", s.output_dim},
                     {"layer_bandwidths", s.layer_bandwidths},
                     {"output_head_layers", s.output_head_layers},
                     {"period", s.period},
                     {"quantize_frequencies", s.quantize_frequencies}};
}

inline void from_json(const nlohmann::json& j, NetworkSpec& s) {
  j.at("input_dim").get_to(s.input_dim);
  j.at("hidden_dim").get_to(s.hidden_dim);
  j.at("num_sine_layers").get_to(s.num_sine_layers);
  j.at("output_dim").get_to(s.output_dim);
  j.at("layer_bandwidths").get_to(s.layer_bandwidths);
  j.at("output_head_layers").get_to(s.output_head_layers);
  j.at("period").get_to(s.period);
  j.at("quantize_frequencies").get_to(s.quantize_frequencies);
}

namespace detail {

inline constexpr std::array<char, 8> kCheckpointMagic{'B', 'A', 'C', 'O', 'N', 'C', 'K', 'P'};

template <class U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t b = 0; b < sizeof(U); ++b) out.push_back(static_cast<unsigned char>((value >> (8 * b)) & 0xFF));
}

template <class U>
U get_le(const unsigned char* in) {
  U v = 0;
  for (std::size_t b = 0; b < sizeof(U); ++b) v |= static_cast<U>(in[b]) << (8 * b);
  return v;
}

template <class F>
void put_float(std::vector<unsigned char>& out, F value) {
  using Bits = std::conditional_t<sizeof(F) == 8, std::uint64_t, std::uint32_t>;
  put_le(out, std::bit_cast<Bits>(value));
}

template <class F>
F get_float(const unsigned char* in) {
  using Bits = std::conditional_t<sizeof(F) == 8, std::uint64_t, std::uint32_t>;
  return std::bit_cast<F>(get_le<Bits>(in));
}

template <class F>
constexpr const char* dtype_name() {
  return sizeof(F) == 8 ? "float64" : "float32";
}

class TensorWriter {
 public:
  template <class Derived>
  void add(const std::string& name, const Eigen::MatrixBase<Derived>& m) {
    using F = typename Derived::Scalar;
    directory_.push_back({{"name", name}, {"dtype", dtype_name<F>()}, {"shape", {m.rows(), m.cols()}}, {"offset", payload_.size()}});
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_float<F>(payload_, m(r, c));
  }
  nlohmann::json directory() const { return directory_; }
  const std::vector<unsigned char>& payload() const { return payload_; }

 private:
  nlohmann::json directory_ = nlohmann::json::array();
  std::vector<unsigned char> payload_;
};

}  // namespace detail

template <class T>
std::vector<unsigned char> serialize_checkpoint(const NetworkSpec& spec, const BaconParams<T>& p) {
  detail::check_params(p, spec);
  detail::TensorWriter w;
  for (std::size_t i = 0; i < p.frequencies.size(); ++i) w.add("frequencies/" + std::to_string(i), p.frequencies[i]);
  for (std::size_t i = 0; i < p.phases.size(); ++i) w.add("phases/" + std::to_string(i), p.phases[i]);
  for (std::size_t i = 0; i < p.hidden_weights.size(); ++i) w.add("hidden_weights/" + std::to_string(i + 1), p.hidden_weights[i]);
  for (std::size_t i = 0; i < p.hidden_biases.size(); ++i) w.add("hidden_biases/" + std::to_string(i + 1), p.hidden_biases[i]);
  for (std::size_t i = 0; i < p.head_weights.size(); ++i) w.add("head_weights/" + std::to_string(i), p.head_weights[i]);
  for (std::size_t i = 0; i < p.head_biases.size(); ++i) w.add("head_biases/" + std::to_string(i), p.head_biases[i]);

  nlohmann::json header{{"format", "bacon-checkpoint"}, {"endianness", "little"}, {"layout", "row-major"},
                        {"spec", spec},                {"tensors", w.directory()}};
  const std::string text = header.dump();
  std::vector<unsigned char> out(detail::kCheckpointMagic.begin(), detail::kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, 1);
  detail::put_le<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.insert(out.end(), w.payload().begin(), w.payload().end());
  return out;
}

template <class T>
struct Checkpoint {
  NetworkSpec spec;
  BaconParams<T> params;
};

template <class T>
Checkpoint<T> deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
  constexpr std::size_t prefix = 8 + 4 + 8;
  if (bytes.size() < prefix || !std::equal(detail::kCheckpointMagic.begin(), detail::kCheckpointMagic.end(), bytes.begin()))
    throw InvalidInput("checkpoint: bad magic");
  if (detail::get_le<std::uint32_t>(bytes.data() + 8) != 1) throw InvalidInput("checkpoint: unsupported version");
  const auto header_len = detail::get_le<std::uint64_t>(bytes.data() + 12);
  if (bytes.size() < prefix + header_len) throw InvalidInput("checkpoint: truncated header");
  const auto header = nlohmann::json::parse(bytes.begin() + prefix, bytes.begin() + static_cast<std::ptrdiff_t>(prefix + header_len));
  if (header.at("endianness") != "little") throw InvalidInput("checkpoint: unsupported endianness");
  const unsigned char* payload = bytes.data() + prefix + header_len;
  const std::size_t payload_size = bytes.size() - prefix - header_len;

  Checkpoint<T> ck;
  ck.spec = header.at("spec").get<NetworkSpec>();
  ck.spec.validate();
  std::map<std::string, Eigen::MatrixXd> raw;
  for (const auto& t : header.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("shape")[0].get<Eigen::Index>();
    const auto cols = t.at("shape")[1].get<Eigen::Index>();
    const auto offset = t.at("offset").get<std::size_t>();
    const bool dbl = t.at("dtype") == "float64";
    const std::size_t width = dbl ? 8 : 4;
    if (offset + static_cast<std::size_t>(rows * cols) * width > payload_size) throw InvalidInput("checkpoint: truncated tensor " + name);
    Eigen::MatrixXd m(rows, cols);
    const unsigned char* at = payload + offset;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c, at += width)
        m(r, c) = dbl ? detail::get_float<double>(at) : static_cast<double>(detail::get_float<float>(at));
    raw[name] = std::move(m);
  }
  auto take = [&](const std::string& name) -> const Eigen::MatrixXd& {
    auto it = raw.find(name);
    if (it == raw.end()) throw InvalidInput("checkpoint: missing tensor " + name);
    return it->second;
  };
  const auto& s = ck.spec;
  for (int i = 0; i < s.num_sine_layers; ++i) {
    ck.params.frequencies.push_back(take("frequencies/" + std::to_string(i)));
    ck.params.phases.push_back(take("phases/" + std::to_string(i)).template cast<T>());
  }
  for (int i = 1; i < s.num_sine_layers; ++i) {
    ck.params.hidden_weights.push_back(take("hidden_weights/" + std::to_string(i)).template cast<T>());
    ck.params.hidden_biases.push_back(take("hidden_biases/" + std::to_string(i)).template cast<T>());
  }
  for (int h = 0; h < s.num_heads(); ++h) {
    ck.params.head_weights.push_back(take("head_weights/" + std::to_string(h)).template cast<T>());
    ck.params.head_biases.push_back(take("head_biases/" + std::to_string(h)).template cast<T>());
  }
  detail::check_params(ck.params, ck.spec);
  return ck;
}

template <class T>
void save_checkpoint(const std::string& path, const NetworkSpec& spec, const BaconParams<T>& p) {
  const auto bytes = serialize_checkpoint(spec, p);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot write checkpoint " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

template <class T>
Checkpoint<T> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidInput("cannot read checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint<T>(bytes);
}

}  // namespace bacon::network
