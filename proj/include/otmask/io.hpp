#pragma once

#include <filesystem>
#include <variant>

#include "otmask/task_maps.hpp"

namespace otmask {

// File formats
// ------------
// Float maps are grayscale PFM ("Pf") written top-to-bottom with a negative scale
// (little-endian). A semantic map with N channels is one PFM of height N*H holding the
// channel planes stacked in order, plus a sidecar "<file>.channels" containing the
// single line "channels=N". A PFM without a sidecar is read as one channel.
//
// Masks are binary PGM (P5, maxval 65535, big-endian samples = target id) with a
// sidecar "<file>.labels" listing "target_id class_id kind" per line.
//
// Points are plain text, one "target_id class_id kind x y" per line; '#' starts a
// comment. Images are binary 8-bit PPM (P6).

std::filesystem::path channels_sidecar(const std::filesystem::path& map_path);
std::filesystem::path labels_sidecar(const std::filesystem::path& mask_path);

void write_semantic_map(const SemanticMap& map, const std::filesystem::path& path);
SemanticMap read_semantic_map(const std::filesystem::path& path);

void write_boundary_map(const BoundaryMap& map, const std::filesystem::path& path);
BoundaryMap read_boundary_map(const std::filesystem::path& path);

/// Dispatches on the channel sidecar: one channel reads as a BoundaryMap, more as a
/// SemanticMap. Values are validated against the respective invariants.
std::variant<SemanticMap, BoundaryMap> read_map(const std::filesystem::path& path);

/// Rejects duplicate target ids, unknown kind tokens and coordinates outside the
/// declared height x width grid.
PointSet read_points(const std::filesystem::path& path, int height, int width);
void write_points(std::span<const PointAnnotation> points, const std::filesystem::path& path);

void write_mask(const PseudoMask& mask, const std::filesystem::path& path);
PseudoMask read_mask(const std::filesystem::path& path);

void write_image(const RgbImage& image, const std::filesystem::path& path);
RgbImage read_image(const std::filesystem::path& path);

}  // namespace otmask
