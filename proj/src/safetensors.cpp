#include "seismo/safetensors.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace seismo {

using nlohmann::json;

namespace {

int64_t dtype_size(const std::string& dtype) {
  if (dtype == "F32") return 4;
  if (dtype == "F64") return 8;
  throw std::runtime_error("safetensors: unsupported dtype " + dtype);
}

}  // namespace

std::map<std::string, std::string> SafeTensorsFile::read_metadata(
    const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("safetensors: cannot open " + path);
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || header_len == 0 || header_len > (1ull << 31))
    throw std::runtime_error("safetensors: bad header length in " + path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("safetensors: truncated header in " + path);
  json j = json::parse(header);
  std::map<std::string, std::string> out;
  if (j.contains("__metadata__"))
    for (auto& [k, v] : j["__metadata__"].items())
      out[k] = v.get<std::string>();
  return out;
}

SafeTensorsFile SafeTensorsFile::read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("safetensors: cannot open " + path);
  uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 8);
  if (!in || header_len == 0 || header_len > (1ull << 31))
    throw std::runtime_error("safetensors: bad header length in " + path);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error("safetensors: truncated header in " + path);
  json j = json::parse(header);

  const std::streampos data_start = in.tellg();
  SafeTensorsFile f;
  for (auto& [name, desc] : j.items()) {
    if (name == "__metadata__") {
      for (auto& [k, v] : desc.items())
        f.metadata_[k] = v.get<std::string>();
      continue;
    }
    SafeTensorEntry e;
    e.dtype = desc.at("dtype").get<std::string>();
    for (auto& d : desc.at("shape")) e.shape.push_back(d.get<int64_t>());
    const auto offs = desc.at("data_offsets");
    const int64_t begin = offs[0].get<int64_t>();
    const int64_t end = offs[1].get<int64_t>();
    int64_t count = 1;
    for (int64_t d : e.shape) count *= d;
    if (end - begin != count * dtype_size(e.dtype))
      throw std::runtime_error("safetensors: offset/shape mismatch for " +
                               name);
    in.seekg(data_start + static_cast<std::streamoff>(begin));
    e.data.resize(static_cast<size_t>(count));
    if (e.dtype == "F32") {
      std::vector<float> buf(static_cast<size_t>(count));
      in.read(reinterpret_cast<char*>(buf.data()), count * 4);
      for (int64_t i = 0; i < count; ++i)
        e.data[static_cast<size_t>(i)] =
            static_cast<double>(buf[static_cast<size_t>(i)]);
    } else {
      in.read(reinterpret_cast<char*>(e.data.data()), count * 8);
    }
    if (!in)
      throw std::runtime_error("safetensors: truncated data for " + name);
    f.order_.push_back(name);
    f.tensors_.emplace(name, std::move(e));
  }
  return f;
}

const SafeTensorEntry& SafeTensorsFile::get(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end())
    throw std::runtime_error("safetensors: missing tensor " + name);
  return it->second;
}

std::vector<std::string> SafeTensorsFile::names() const { return order_; }

void SafeTensorsFile::add(const std::string& name, std::vector<int64_t> shape,
                          const std::vector<double>& data, bool as_f32) {
  int64_t count = 1;
  for (int64_t d : shape) count *= d;
  if (count != static_cast<int64_t>(data.size()))
    throw std::runtime_error("safetensors: shape/data mismatch for " + name);
  SafeTensorEntry e;
  e.dtype = as_f32 ? "F32" : "F64";
  e.shape = std::move(shape);
  e.data = data;
  if (!tensors_.count(name)) order_.push_back(name);
  tensors_[name] = std::move(e);
  write_as_f32_[name] = as_f32;
}

void SafeTensorsFile::write(const std::string& path) const {
  json header = json::object();
  if (!metadata_.empty()) {
    json md = json::object();
    for (const auto& [k, v] : metadata_) md[k] = v;
    header["__metadata__"] = md;
  }
  int64_t offset = 0;
  for (const auto& name : order_) {
    const auto& e = tensors_.at(name);
    const int64_t bytes =
        static_cast<int64_t>(e.data.size()) * dtype_size(e.dtype);
    header[name] = {{"dtype", e.dtype},
                    {"shape", e.shape},
                    {"data_offsets", {offset, offset + bytes}}};
    offset += bytes;
  }
  std::string hs = header.dump();
  // pad header to 8-byte alignment with spaces (conventional)
  while (hs.size() % 8 != 0) hs.push_back(' ');
  const uint64_t hlen = hs.size();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("safetensors: cannot write " + path);
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& name : order_) {
    const auto& e = tensors_.at(name);
    if (e.dtype == "F32") {
      std::vector<float> buf(e.data.size());
      for (size_t i = 0; i < e.data.size(); ++i)
        buf[i] = static_cast<float>(e.data[i]);
      out.write(reinterpret_cast<const char*>(buf.data()),
                static_cast<std::streamsize>(buf.size() * 4));
    } else {
      out.write(reinterpret_cast<const char*>(e.data.data()),
                static_cast<std::streamsize>(e.data.size() * 8));
    }
  }
  if (!out) throw std::runtime_error("safetensors: write failed for " + path);
}

}  // namespace seismo
