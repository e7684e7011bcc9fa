#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

// Binary container shared by labeler and classifier models:
//   "DKMP" | u16 version | u32 manifest length | manifest (UTF-8 key=value
//   lines, then "block=<name> <rows> <cols>" lines) | row-major LE float32
//   arrays in block order | u32 CRC-32 of everything after the version field.
namespace dekompost::model_file {

inline constexpr char kMagic[4] = {'D', 'K', 'M', 'P'};
inline constexpr std::uint16_t kVersion = 1;

struct NamedArray {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;  // row-major
};

struct ModelFile {
  // Ordered; keys may repeat (e.g. one "token" line per vocabulary entry).
  std::vector<std::pair<std::string, std::string>> fields;
  std::vector<NamedArray> arrays;

  void set(std::string key, std::string value) { fields.emplace_back(std::move(key), std::move(value)); }
  // Throws DataError when missing.
  const std::string& get(std::string_view key) const;
  bool has(std::string_view key) const;
  std::vector<std::string> get_all(std::string_view key) const;
  const NamedArray& array(std::string_view name) const;
};

std::string serialize(const ModelFile& model);
ModelFile parse(std::string_view bytes);

void save(const ModelFile& model, const std::filesystem::path& path);
ModelFile load(const std::filesystem::path& path);

}  // namespace dekompost::model_file
