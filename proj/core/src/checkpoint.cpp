#include "cite/checkpoint.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "cite/error.hpp"

namespace cite {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'C', 'I', 'T', 'E'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

template <typename T>
T get_le(std::span<const std::uint8_t> bytes, std::size_t offset) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[offset + i]) << (8 * i);
  return v;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::string join_dims(const EncoderParams& p) {
  std::string s;
  if (p.layers.empty()) return s;
  s += std::to_string(p.input_dim());
  for (const auto& l : p.layers) s += "," + std::to_string(l.weight.cols());
  return s;
}

std::string join_flags(const EncoderParams& p) {
  std::string s;
  for (std::size_t i = 0; i < p.layers.size(); ++i) s += (i ? "," : "") + std::string(p.layers[i].trainable ? "1" : "0");
  return s;
}

std::vector<std::size_t> split_numbers(const std::string& text, char sep, const char* key) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(sep, start);
    const std::string tok = text.substr(start, end == std::string::npos ? std::string::npos : end - start);
    std::size_t v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail(ErrorCode::kSchema, std::string("bad value in header key ") + key);
    out.push_back(v);
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

void put_matrix(std::vector<std::uint8_t>& out, const Matrix& m) {
  for (double v : m.values()) put_le(out, std::bit_cast<std::uint64_t>(v));
}

EncoderParams shape_encoder(const std::string& dims_text, const std::string& flags_text, const char* key) {
  EncoderParams p;
  if (dims_text.empty()) return p;
  const auto dims = split_numbers(dims_text, ',', key);
  const auto flags = split_numbers(flags_text, ',', key);
  if (dims.size() < 2 || flags.size() != dims.size() - 1) fail(ErrorCode::kSchema, std::string("inconsistent ") + key);
  for (std::size_t i = 0; i + 1 < dims.size(); ++i)
    p.layers.push_back(DenseLayer{Matrix(dims[i], dims[i + 1]), Matrix(1, dims[i + 1]), flags[i] != 0});
  return p;
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  std::ostringstream header;
  header << "image_dims=" << join_dims(c.model.image) << '\n'
         << "image_trainable=" << join_flags(c.model.image) << '\n'
         << "image_layers=" << c.model.image.layers.size() << '\n'
         << "text_dims=" << join_dims(c.model.text) << '\n'
         << "text_trainable=" << join_flags(c.model.text) << '\n'
         << "text_layers=" << c.model.text.layers.size() << '\n'
         << "classifier=" << c.classifier.weights.rows() << 'x' << c.classifier.weights.cols() << '\n'
         << "classifier_trainable=" << (c.classifier.trainable ? 1 : 0) << '\n'
         << "step=" << c.step << '\n'
         << "fingerprint=" << c.fingerprint << '\n';
  const std::string h = header.str();

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  for (const auto* enc : {&c.model.image, &c.model.text}) {
    for (const auto& l : enc->layers) {
      put_matrix(out, l.weight);
      put_matrix(out, l.bias);
    }
  }
  put_matrix(out, c.classifier.weights);
  put_le<std::uint32_t>(out, crc32_of(out));
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  constexpr std::size_t kFixed = 4 + 2 + 4;
  if (bytes.size() < kFixed + 4) fail(ErrorCode::kChecksumMismatch, "checkpoint is truncated");
  const auto body = bytes.first(bytes.size() - 4);
  if (crc32_of(body) != get_le<std::uint32_t>(bytes, bytes.size() - 4))
    fail(ErrorCode::kChecksumMismatch, "CRC32 does not match contents");
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) fail(ErrorCode::kSchema, "bad magic");
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kCheckpointVersion)
    fail(ErrorCode::kFormatVersionMismatch, "checkpoint version " + std::to_string(version) + ", expected " +
                                                std::to_string(kCheckpointVersion));
  const auto header_len = get_le<std::uint32_t>(bytes, 6);
  if (kFixed + header_len > body.size()) fail(ErrorCode::kSchema, "header length exceeds file");

  std::map<std::string, std::string> kv;
  std::istringstream header(std::string(reinterpret_cast<const char*>(bytes.data() + kFixed), header_len));
  for (std::string line; std::getline(header, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::kSchema, "header line without '='");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"image_dims", "image_trainable", "image_layers", "text_dims", "text_trainable", "text_layers",
                          "classifier", "classifier_trainable", "step", "fingerprint"})
    if (!kv.contains(key)) fail(ErrorCode::kSchema, std::string("missing header key ") + key);

  Checkpoint c;
  c.model.image = shape_encoder(kv["image_dims"], kv["image_trainable"], "image_dims");
  c.model.text = shape_encoder(kv["text_dims"], kv["text_trainable"], "text_dims");
  if (split_numbers(kv["image_layers"], ',', "image_layers").at(0) != c.model.image.layers.size() ||
      split_numbers(kv["text_layers"], ',', "text_layers").at(0) != c.model.text.layers.size())
    fail(ErrorCode::kSchema, "layer count disagrees with dims");
  const auto cls = split_numbers(kv["classifier"], 'x', "classifier");
  if (cls.size() != 2) fail(ErrorCode::kSchema, "classifier must be RxC");
  c.classifier.weights = Matrix(cls[0], cls[1]);
  c.classifier.trainable = split_numbers(kv["classifier_trainable"], ',', "classifier_trainable").at(0) != 0;
  c.step = split_numbers(kv["step"], ',', "step").at(0);
  c.fingerprint = kv["fingerprint"];

  std::size_t offset = kFixed + header_len;
  auto read_matrix = [&](Matrix& m) {
    if (offset + 8 * m.size() > body.size()) fail(ErrorCode::kSchema, "parameter data shorter than header declares");
    for (double& v : m.values()) {
      v = std::bit_cast<double>(get_le<std::uint64_t>(bytes, offset));
      offset += 8;
    }
  };
  for (auto* enc : {&c.model.image, &c.model.text}) {
    for (auto& l : enc->layers) {
      read_matrix(l.weight);
      read_matrix(l.bias);
    }
  }
  read_matrix(c.classifier.weights);
  if (offset != body.size()) fail(ErrorCode::kSchema, "trailing bytes after parameter data");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

bool same_architecture(const Checkpoint& a, const Checkpoint& b) {
  auto same_enc = [](const EncoderParams& x, const EncoderParams& y) {
    if (x.layers.size() != y.layers.size()) return false;
    for (std::size_t i = 0; i < x.layers.size(); ++i) {
      if (!x.layers[i].weight.same_shape(y.layers[i].weight) || !x.layers[i].bias.same_shape(y.layers[i].bias))
        return false;
    }
    return true;
  };
  return same_enc(a.model.image, b.model.image) && same_enc(a.model.text, b.model.text) &&
         a.classifier.weights.same_shape(b.classifier.weights);
}

}  // namespace cite
