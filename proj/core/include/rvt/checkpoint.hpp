#pragma once

#include <string>

#include "rvt/model.hpp"

namespace rvt {

// Weight container: magic "RVTW", u32 format version, length-prefixed model
// config JSON, then one record per parameter (u32 name length, name bytes,
// u8 dtype tag, u32 rank, u32 extents, raw little-endian data). Round-trips
// bitwise; loading rebuilds the model from the embedded config.
void save_checkpoint(const Model<float>& m, const std::string& path);
void save_checkpoint(const Model<double>& m, const std::string& path);

Model<float> load_checkpoint(const std::string& path);
Model<double> load_checkpoint_f64(const std::string& path);

}  // namespace rvt
