#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace readmit {

using Rng = std::mt19937_64;

// 64-bit FNV-1a over the bytes of `text`.
std::uint64_t fnv1a(std::string_view text) noexcept;

// SplitMix64 finalizer; a bijective scrambler for seed derivation.
std::uint64_t splitmix64(std::uint64_t value) noexcept;

// Derives an independent stream seed for a named stage from the global seed.
// Stage-level reruns use the same derivation as full pipeline runs.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stage) noexcept;

// Derives the seed of the `index`-th substream of `seed` (per-point,
// per-resample, per-fold streams).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept;

}  // namespace readmit
