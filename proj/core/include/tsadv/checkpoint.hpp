#pragma once

#include <string>

#include "tsadv/model.hpp"

namespace tsadv {

// Versioned binary checkpoint: magic, format version, architecture
// descriptor, training metadata, then a manifest of named/shaped
// little-endian f32 parameter blobs plus batch-norm running statistics.
// save followed by load reproduces predictions bit-exactly.
void save_checkpoint(const Model<float>& model, const std::string& path);
Model<float> load_checkpoint(const std::string& path);

// FNV-1a 64-bit digest of a file, used by run manifests.
std::string file_digest(const std::string& path);

}  // namespace tsadv
