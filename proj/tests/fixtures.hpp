#pragma once

#include <random>

#include "kapla/access.hpp"
#include "kapla/hw.hpp"
#include "kapla/ir.hpp"
#include "kapla/network.hpp"

namespace kapla::testing {

/// 64-batch CONV: 16 -> 96 channels, 19x19 in, 5x5 filter, 15x15 out.
LayerSpec wide_conv_layer();

/// Depthwise follower: 96 channels, 15x15 in, 3x3 filter, stride 2, 7x7 out.
LayerSpec depthwise_layer();

/// Hand schedule for wide_conv_layer on a regfile+buffer hierarchy, written
/// in the same shape a sliding-window dataflow would emit: per-PE window
/// tiles, filter-row spatial placement, paired fmap updates.
LayerSchedule wide_conv_schedule();

/// Hand schedule for depthwise_layer, buffer level only: channel and batch
/// stacking plus a fmap split whose stacked extent overshoots the bound.
LayerSchedule depthwise_schedule();

/// Two-level mesh hardware: per-PE regfile, per-node buffer, DRAM.
HardwareSpec mesh_hw(int64_t regf_bytes = 128, int64_t gbuf_bytes = 32 * 1024,
                     int mesh = 16, int pes = 8);

/// Random but always-valid single-layer schedule: consistent tile sizes per
/// level, trip-compatible update groups, occasional stacking and sharing.
/// Dims and sizes stay small enough for the brute-force oracle.
LayerSchedule random_schedule(std::mt19937& rng, DimMap& full_dims);

}  // namespace kapla::testing
