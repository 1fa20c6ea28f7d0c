#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "widthfold/tensor.hpp"

namespace widthfold {

// Named collection of tensors with a stable order. On disk this is a JSON
// manifest (`tensors: [{name, shape, dtype:"f32", file, byte_offset}]`) plus
// raw little-endian float32 blobs with no header.
class TensorBundle {
 public:
  void add(std::string name, DenseTensor t);  // throws ManifestParse on duplicate names
  bool contains(const std::string& name) const;
  const DenseTensor& at(const std::string& name) const;
  void remove(const std::string& name);

  const std::vector<std::pair<std::string, DenseTensor>>& entries() const {
    return entries_;
  }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, DenseTensor>> entries_;
};

// Reads a manifest and its blobs. Throws ManifestParse on malformed JSON or
// fields, BlobSizeMismatch if a declared tensor does not fit its blob,
// IoFailure on filesystem errors. Roundtrips are bit-exact, including signed
// zeros, subnormals and NaN payloads.
TensorBundle read_bundle(const std::filesystem::path& manifest_path);

// Writes `manifest_path` plus a single `<stem>.bin` blob beside it.
void write_bundle(const TensorBundle& bundle,
                  const std::filesystem::path& manifest_path);

}  // namespace widthfold
