#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkv/flow.hpp"
#include "mkv/measure.hpp"

namespace mkv {

/// Binary measure format: magic "MKV1", little-endian u32 n, f64 L,
/// then n f64 cell masses.
void write_mkv1(const std::string& path, const GridMeasure& mu);
GridMeasure read_mkv1(const std::string& path);

/// "z,p" header then one row per cell, 17 significant digits.
void write_measure_csv(const std::string& path, const GridMeasure& mu);

/// Trajectory CSV with columns t, F, slope2, mean, W2_to_minus, W2_to_zero,
/// W2_to_plus; the reference measures supply the three distance columns.
void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj,
                          const GridMeasure& mu_minus, const GridMeasure& mu_zero,
                          const GridMeasure& mu_plus);

/// Format a double with 17 significant digits (round-trips exactly).
std::string fmt17(double v);

/// FNV-1a 64-bit hash of a file's bytes, as 16 hex digits.
std::string file_hash_hex(const std::string& path);

}
