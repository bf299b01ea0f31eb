#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aquathru/raster.hpp"

namespace aquathru {

// Interchange formats: binary PPM (P6, maxval 255 or 65535) for images,
// grayscale PFM (Pf) for range/confidence/mask rasters. PPM 16-bit samples
// are big-endian; PFM endianness follows the sign of the scale line and the
// writer always emits little-endian. PFM rows are stored bottom-to-top in
// the file and returned top-to-bottom. Parse errors report a byte offset
// and never read past the declared payload.

RgbImage read_ppm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_ppm(const RgbImage& img, int maxval = 65535);

// NaN samples become invalid pixels; negative or infinite samples are errors.
RangeMap read_pfm_range(std::span<const std::uint8_t> bytes);
// Samples must be finite and in [0,1].
ConfidenceMap read_pfm_confidence(std::span<const std::uint8_t> bytes);
// Samples must be exactly 0 or 1.
DepthMask read_pfm_mask(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> write_pfm(const RangeMap& map);
std::vector<std::uint8_t> write_pfm(const ConfidenceMap& map);
std::vector<std::uint8_t> write_pfm(const DepthMask& mask);

// 8-bit binary PGM (P5), used for inspection heatmaps.
std::vector<std::uint8_t> write_pgm(std::span<const std::uint8_t> gray, int width, int height);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

RgbImage load_ppm(const std::string& path);
void save_ppm(const RgbImage& img, const std::string& path, int maxval = 65535);
RangeMap load_pfm_range(const std::string& path);
ConfidenceMap load_pfm_confidence(const std::string& path);
DepthMask load_pfm_mask(const std::string& path);
void save_pfm(const RangeMap& map, const std::string& path);
void save_pfm(const ConfidenceMap& map, const std::string& path);
void save_pfm(const DepthMask& mask, const std::string& path);

}  // namespace aquathru
