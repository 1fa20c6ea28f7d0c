#include "widthfold/bundle.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

namespace widthfold {

namespace {

// Blobs are little-endian float32 regardless of host order; go through the
// bit pattern so NaN payloads and signed zeros survive untouched.
void encode_f32_le(const float* src, std::size_t count, std::vector<char>& out) {
  out.resize(count * 4);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits;
    std::memcpy(&bits, &src[i], 4);
    out[4 * i + 0] = static_cast<char>(bits & 0xff);
    out[4 * i + 1] = static_cast<char>((bits >> 8) & 0xff);
    out[4 * i + 2] = static_cast<char>((bits >> 16) & 0xff);
    out[4 * i + 3] = static_cast<char>((bits >> 24) & 0xff);
  }
}

std::vector<float> decode_f32_le(const char* src, std::size_t count) {
  std::vector<float> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint32_t bits =
        (static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + 0]))) |
        (static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + 1])) << 8) |
        (static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + 2])) << 16) |
        (static_cast<std::uint32_t>(static_cast<unsigned char>(src[4 * i + 3])) << 24);
    std::memcpy(&out[i], &bits, 4);
  }
  return out;
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  if (in.bad()) throw IoFailure("read failed for " + path.string());
  return bytes;
}

}  // namespace

void TensorBundle::add(std::string name, DenseTensor t) {
  if (contains(name)) {
    throw ManifestParse("duplicate tensor name '" + name + "' in bundle");
  }
  entries_.emplace_back(std::move(name), std::move(t));
}

bool TensorBundle::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

const DenseTensor& TensorBundle::at(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ManifestParse("bundle has no tensor named '" + name + "'");
}

void TensorBundle::remove(const std::string& name) {
  for (auto it = entries_.begin(); it != entries_.end(); ++it) {
    if (it->first == name) {
      entries_.erase(it);
      return;
    }
  }
}

TensorBundle read_bundle(const std::filesystem::path& manifest_path) {
  nlohmann::json manifest;
  {
    std::ifstream in(manifest_path);
    if (!in) throw IoFailure("cannot open " + manifest_path.string());
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw ManifestParse(manifest_path.string() + ": " + e.what());
    }
  }
  if (!manifest.is_object() || !manifest.contains("tensors") ||
      !manifest["tensors"].is_array()) {
    throw ManifestParse(manifest_path.string() +
                        ": expected object with a 'tensors' array");
  }

  const auto dir = manifest_path.parent_path();
  std::map<std::string, std::vector<char>> blobs;  // file -> bytes

  TensorBundle bundle;
  for (const auto& entry : manifest["tensors"]) {
    std::string name, file, dtype;
    Shape shape;
    std::uint64_t byte_offset = 0;
    try {
      name = entry.at("name").get<std::string>();
      file = entry.at("file").get<std::string>();
      dtype = entry.at("dtype").get<std::string>();
      shape = entry.at("shape").get<Shape>();
      byte_offset = entry.value("byte_offset", std::uint64_t{0});
    } catch (const nlohmann::json::exception& e) {
      throw ManifestParse(manifest_path.string() + ": bad tensor entry: " +
                          e.what());
    }
    if (dtype != "f32") {
      throw ManifestParse("tensor '" + name + "': unsupported dtype '" +
                          dtype + "'");
    }
    auto [it, inserted] = blobs.try_emplace(file);
    if (inserted) it->second = read_file(dir / file);
    const auto& blob = it->second;

    const std::uint64_t want_bytes =
        static_cast<std::uint64_t>(numel(shape)) * 4;
    if (byte_offset + want_bytes > blob.size()) {
      throw BlobSizeMismatch("tensor '" + name + "' wants bytes [" +
                             std::to_string(byte_offset) + ", " +
                             std::to_string(byte_offset + want_bytes) +
                             ") but blob '" + file + "' has " +
                             std::to_string(blob.size()) + " bytes");
    }
    auto data = decode_f32_le(blob.data() + byte_offset,
                              static_cast<std::size_t>(numel(shape)));
    try {
      bundle.add(std::move(name), DenseTensor(std::move(shape), std::move(data)));
    } catch (const ShapeMismatch& e) {
      throw ManifestParse(manifest_path.string() + ": " + e.what());
    }
  }
  return bundle;
}

void write_bundle(const TensorBundle& bundle,
                  const std::filesystem::path& manifest_path) {
  const auto blob_name = manifest_path.stem().string() + ".bin";
  const auto blob_path = manifest_path.parent_path() / blob_name;

  nlohmann::json tensors = nlohmann::json::array();
  std::vector<char> blob;
  std::uint64_t offset = 0;
  std::vector<char> chunk;
  for (const auto& [name, t] : bundle.entries()) {
    encode_f32_le(t.data().data(), t.data().size(), chunk);
    blob.insert(blob.end(), chunk.begin(), chunk.end());
    tensors.push_back({{"name", name},
                       {"shape", t.shape()},
                       {"dtype", "f32"},
                       {"file", blob_name},
                       {"byte_offset", offset}});
    offset += chunk.size();
  }

  std::error_code ec;
  std::filesystem::create_directories(manifest_path.parent_path(), ec);

  {
    std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + blob_path.string());
    out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!out) throw IoFailure("write failed for " + blob_path.string());
  }
  {
    nlohmann::json manifest{{"tensors", tensors}};
    std::ofstream out(manifest_path, std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + manifest_path.string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoFailure("write failed for " + manifest_path.string());
  }
}

}  // namespace widthfold
