#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace seismo {

// Minimal reader/writer for the safetensors container format: an 8-byte
// little-endian header length, a JSON header mapping tensor names to
// {dtype, shape, data_offsets}, then the raw data block. Supports F32 and
// F64 tensors plus the optional __metadata__ string map.
struct SafeTensorEntry {
  std::string dtype;  // "F32" or "F64"
  std::vector<int64_t> shape;
  std::vector<double> data;  // converted to double on read
};

class SafeTensorsFile {
 public:
  static SafeTensorsFile read(const std::string& path);

  // Parses only the JSON header and returns the __metadata__ map.
  static std::map<std::string, std::string> read_metadata(
      const std::string& path);

  bool has(const std::string& name) const { return tensors_.count(name) > 0; }
  const SafeTensorEntry& get(const std::string& name) const;
  std::vector<std::string> names() const;
  const std::map<std::string, std::string>& metadata() const {
    return metadata_;
  }

  // Writer: tensors serialized in insertion order.
  void add(const std::string& name, std::vector<int64_t> shape,
           const std::vector<double>& data, bool as_f32 = false);
  void set_metadata(const std::string& key, const std::string& value) {
    metadata_[key] = value;
  }
  void write(const std::string& path) const;

 private:
  std::map<std::string, SafeTensorEntry> tensors_;
  std::vector<std::string> order_;
  std::map<std::string, bool> write_as_f32_;
  std::map<std::string, std::string> metadata_;
};

}  // namespace seismo
