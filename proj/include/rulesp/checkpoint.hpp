#pragma once

#include <cstdint>
#include <filesystem>

#include "rulesp/meta_trainer.hpp"

namespace rulesp {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Fingerprint of the parser and generator architectures a state belongs to.
std::uint64_t model_fingerprint(const Parser& parser, const Generator& generator);

/// Binary snapshot of a TrainerState stamped with `fingerprint`.
void save_checkpoint(const std::filesystem::path& path, const TrainerState& state, std::uint64_t fingerprint);

/// Throws IncompatibleCheckpoint on a bad header, a version or fingerprint
/// mismatch, or a truncated file.
TrainerState load_checkpoint(const std::filesystem::path& path, std::uint64_t fingerprint);

}  // namespace rulesp
