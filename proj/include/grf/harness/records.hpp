#pragma once

#include "grf/engine/engine.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace grf::harness {

inline constexpr int kRecordSchemaVersion = 1;

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Sample logs are line-delimited JSON: a header line naming the format,
/// schema version and sample kind, then one sample per line with every
/// feature column under its layout name.
void write_gate_records(std::ostream& out, const std::vector<gate::GateSample>& samples);
void write_rank_records(std::ostream& out, const std::vector<rank::RankSample>& samples);

std::vector<gate::GateSample> read_gate_records(std::istream& in);
std::vector<rank::RankSample> read_rank_records(std::istream& in);

void save_gate_records(const std::string& path, const std::vector<gate::GateSample>& samples);
void save_rank_records(const std::string& path, const std::vector<rank::RankSample>& samples);
std::vector<gate::GateSample> load_gate_records(const std::string& path);
std::vector<rank::RankSample> load_rank_records(const std::string& path);

}  // namespace grf::harness
