#pragma once

#include <filesystem>
#include <string>

#include "lflow/field.hpp"

namespace lflow {

/// Binary PGM (P5), 8- or 16-bit; samples are scaled to [0, 1].
RealField read_image(const std::filesystem::path& path);
RealField decode_pgm(const std::string& bytes);

/// Clamps to [0, 1] and quantises with round-half-even. `maxval` 255 writes
/// 8-bit samples, anything up to 65535 writes big-endian 16-bit samples.
void write_image(const std::filesystem::path& path, const RealField& field, unsigned maxval = 65535);
std::string encode_pgm(const RealField& field, unsigned maxval = 65535);

}  // namespace lflow
