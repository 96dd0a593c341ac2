#pragma once

#include <cstdint>
#include <string>

#include "deepfgs/model.hpp"

namespace dfgs {

// Versioned binary model archive, little-endian throughout:
//   magic "FGCK" | u8 version=1 | u64 content hash |
//   configuration (c1, c2, n_hidden, hyper_channels, group_size as i32;
//   lambda f64; metric u8; use_frr/use_ffm/use_mem/single_rate u8; seed u64) |
//   u32 parameter count | per parameter: u16 name length, name bytes,
//   shape as 4×i32 (n,c,h,w), then n·c·h·w f64 values.
// Parameters are written in registry order under their canonical
// module.stage.kind names; the hash covers configuration and values and is
// the same fingerprint bitstreams embed, so a checkpoint can be validated
// against any stream it produced.

void save_checkpoint(const Model& m, const std::string& path);

// Reconstructs the model, overwrites every parameter from the archive, and
// verifies the stored content hash against the rebuilt model. Throws
// DataError on malformed input, unknown/missing/mis-shaped parameters, or a
// hash mismatch.
Model load_checkpoint(const std::string& path);

// The archive's embedded hash without rebuilding the model (header read).
std::uint64_t checkpoint_hash(const std::string& path);

}  // namespace dfgs
