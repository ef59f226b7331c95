#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slu/model.hpp"
#include "slu/numerics.hpp"

namespace slu {

inline constexpr const char* kCheckpointMagic = "SLU-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

struct Provenance {
  std::string strategy;
  std::size_t stage_index = 0;
  std::string stage_kind;
  std::string source_corpus;
  std::uint64_t seed = 0;
  // Checkpoint path used for transfer initialization, if any.
  std::string transfer_from;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Checkpoint {
  ModelConfig config;
  // Output label names; index 0 is the blank.
  std::vector<std::string> labels;
  ParamStore params;
  Provenance provenance;
};

// A magic/version line followed by one JSON document.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace slu
