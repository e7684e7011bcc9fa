#include "dekompost/model_file.h"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>

#include "dekompost/common.h"
#include "dekompost/corpus.h"

namespace dekompost::model_file {

namespace {

static_assert(std::endian::native == std::endian::little, "model files assume a little-endian host");

template <typename T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw DataError("truncated model file");
  T value;
  std::memcpy(&value, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return value;
}

std::uint32_t crc(std::string_view bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size())));
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("bad block shape '" + s + "'");
  return v;
}

}  // namespace

const std::string& ModelFile::get(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return v;
  }
  throw DataError("model file lacks field '" + std::string(key) + "'");
}

bool ModelFile::has(std::string_view key) const {
  for (const auto& [k, v] : fields) {
    if (k == key) return true;
  }
  return false;
}

std::vector<std::string> ModelFile::get_all(std::string_view key) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : fields) {
    if (k == key) out.push_back(v);
  }
  return out;
}

const NamedArray& ModelFile::array(std::string_view name) const {
  for (const auto& a : arrays) {
    if (a.name == name) return a;
  }
  throw DataError("model file lacks block '" + std::string(name) + "'");
}

std::string serialize(const ModelFile& model) {
  std::string manifest;
  for (const auto& [k, v] : model.fields) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw DataError("model field '" + k + "' cannot be serialized");
    }
    manifest += k + '=' + v + '\n';
  }
  for (const auto& a : model.arrays) {
    if (a.data.size() != a.rows * a.cols) throw DataError("block '" + a.name + "' has inconsistent shape");
    manifest += "block=" + a.name + ' ' + std::to_string(a.rows) + ' ' + std::to_string(a.cols) + '\n';
  }
  std::string body;
  put<std::uint32_t>(body, static_cast<std::uint32_t>(manifest.size()));
  body += manifest;
  for (const auto& a : model.arrays) {
    body.append(reinterpret_cast<const char*>(a.data.data()), a.data.size() * sizeof(float));
  }
  std::string out(kMagic, 4);
  put<std::uint16_t>(out, kVersion);
  out += body;
  put<std::uint32_t>(out, crc(body));
  return out;
}

ModelFile parse(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("bad model header");
  std::size_t pos = 4;
  auto version = take<std::uint16_t>(bytes, pos);
  if (version != kVersion) throw DataError("unsupported model version " + std::to_string(version));
  if (bytes.size() < pos + 8) throw DataError("truncated model file");
  std::string_view body = bytes.substr(pos, bytes.size() - pos - 4);
  std::size_t tail = bytes.size() - 4;
  if (take<std::uint32_t>(bytes, tail) != crc(body)) throw DataError("model checksum mismatch");

  auto manifest_len = take<std::uint32_t>(bytes, pos);
  if (pos + manifest_len > bytes.size() - 4) throw DataError("truncated model manifest");
  std::string_view manifest = bytes.substr(pos, manifest_len);
  pos += manifest_len;

  ModelFile model;
  for (const auto& line : split_string(manifest, '\n')) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("bad manifest line '" + line + "'");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    if (key == "block") {
      auto parts = split_string(value, ' ');
      if (parts.size() != 3) throw DataError("bad block line '" + line + "'");
      model.arrays.push_back(NamedArray{parts[0], to_size(parts[1]), to_size(parts[2]), {}});
    } else {
      model.fields.emplace_back(std::move(key), std::move(value));
    }
  }
  for (auto& a : model.arrays) {
    const std::size_t n = a.rows * a.cols;
    if (pos + n * sizeof(float) > bytes.size() - 4) throw DataError("truncated block '" + a.name + "'");
    a.data.resize(n);
    std::memcpy(a.data.data(), bytes.data() + pos, n * sizeof(float));
    pos += n * sizeof(float);
  }
  if (pos != bytes.size() - 4) throw DataError("trailing bytes in model file");
  return model;
}

void save(const ModelFile& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  const auto bytes = serialize(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ModelFile load(const std::filesystem::path& path) { return parse(corpus::read_file(path)); }

}  // namespace dekompost::model_file
