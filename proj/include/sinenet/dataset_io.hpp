#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "sinenet/field_set.hpp"

namespace sinenet {

/// On-disk dataset container: a directory holding manifest.json plus one
/// binary tensor file per trajectory.
///
/// Binary layout (little-endian):
///   bytes  0..7   magic "SNTRAJ01"
///   bytes  8..15  reserved, zero
///   bytes 16..31  uint32 dims [T, M, N1, N2]
///   bytes 32..    float32 payload, row-major [t][field][x][y]
///
/// Snapshot times are reconstructed as t0 + i*dt from the manifest entry.

inline constexpr char kTrajMagic[9] = "SNTRAJ01";
inline constexpr char kParamMagic[9] = "SNPARM01";

/// Writes one tensor file with the given 8-char magic and 4 dims.
void write_tensor_f32(const std::string& path, const char magic[9],
                      const std::array<std::uint32_t, 4>& dims, const std::vector<float>& payload);

/// Reads a tensor file, checking the magic and payload size.
/// Error messages distinguish: bad magic, payload size mismatch.
void read_tensor_f32(const std::string& path, const char magic[9],
                     std::array<std::uint32_t, 4>& dims, std::vector<float>& payload);

/// Writes a single trajectory's binary file (no manifest). Safe to call from
/// concurrent workers on distinct paths; the manifest is assembled separately.
void write_trajectory_file(const Trajectory& traj, const std::string& path);

/// Saves manifest.json + one file per trajectory under `dir` (created if absent).
void save_dataset(const Dataset& dataset, const std::string& dir);

/// Loads a dataset directory; validates format_version, magics, and that every
/// tensor's dims match its manifest entry.
Dataset load_dataset(const std::string& dir);

}  // namespace sinenet
