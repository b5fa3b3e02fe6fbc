#pragma once

#include "grf/gate/gate_model.hpp"
#include "grf/harness/config.hpp"
#include "grf/rank/rank_model.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace grf::harness {

enum class ModelKind : std::uint32_t { gate = 1, rank = 2 };
const char* to_string(ModelKind k);

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  bool operator==(const NamedTensor&) const = default;
};

/// Portable model file: "GRFC", version, kind, hyperparameter text, tensor
/// table, then a CRC-32 of every preceding byte. Integers and floats are
/// little-endian.
struct Checkpoint {
  ModelKind kind = ModelKind::gate;
  std::string hyperparameters;  // INI text
  std::vector<NamedTensor> tensors;

  bool operator==(const Checkpoint&) const = default;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Code { io, bad_magic, version_mismatch, crc_mismatch, kind_mismatch, truncated, malformed };
  CheckpointError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};
const char* to_string(CheckpointError::Code c);

std::string encode_checkpoint(const Checkpoint& c);
/// Verifies magic, version and CRC (in that order), then parses the body.
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path, std::optional<ModelKind> expected = std::nullopt);

Checkpoint to_checkpoint(const gate::GateModel& model);
Checkpoint to_checkpoint(const rank::RankModel& model);

/// Rebuild a model from a checkpoint; a checkpoint of the other kind is a
/// kind_mismatch error, and a missing or misshapen tensor is malformed.
gate::GateModel gate_from_checkpoint(const Checkpoint& c);
rank::RankModel rank_from_checkpoint(const Checkpoint& c);

}  // namespace grf::harness
