#pragma once

namespace c2p {

inline constexpr const char* kToolVersion = "0.1.0";

/// Bumped whenever the checkpoint directory layout changes incompatibly.
inline constexpr int kCheckpointFormat = 1;

}  // namespace c2p
