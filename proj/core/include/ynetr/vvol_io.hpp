#pragma once

#include <filesystem>
#include <variant>

#include "ynetr/volume.hpp"

namespace ynetr {

// .vvol: a short text header followed by a raw little-endian payload.
//
//   vvol 1
//   element float32 | uint32
//   shape <nx> <ny> <nz>
//   spacing <sx> <sy> <sz>
//   byte_order little
//   end_header
//   <nx*ny*nz 4-byte elements, x fastest>
//
// Scalar volumes use float32, label volumes uint32 (values 0 or 1). Spacing is
// written in shortest round-trip form so read(write(v)) is bitwise identical.

using AnyVolume = std::variant<Volume3D, LabelVolume>;

void write_vvol(const Volume3D& v, const std::filesystem::path& path);
void write_vvol(const LabelVolume& v, const std::filesystem::path& path);

AnyVolume read_vvol(const std::filesystem::path& path);
// Typed readers; throw FormatError when the file holds the other element kind.
Volume3D read_volume(const std::filesystem::path& path);
LabelVolume read_labels(const std::filesystem::path& path);

}  // namespace ynetr
