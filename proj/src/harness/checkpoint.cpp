#include "grf/harness/checkpoint.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <sstream>

namespace grf::harness {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'F', 'C'};
using Code = CheckpointError::Code;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xffu));
}

void put_string(std::string& out, const std::string& s) {
  put_u32(out, std::uint32_t(s.size()));
  out += s;
}

std::uint32_t crc_of(std::string_view bytes) {
  return std::uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size())));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(bytes_[pos_ + std::size_t(i)])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string string() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(Code::truncated, "checkpoint: truncated body");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string state_block(const std::vector<std::pair<std::string, std::int64_t>>& counters) {
  std::string s = "\n[state]\n";
  for (const auto& [k, v] : counters) s += k + " = " + std::to_string(v) + "\n";
  return s;
}

std::int64_t state_counter(const std::string& text, const std::string& key) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
    return tree.get<std::int64_t>("state." + key);
  } catch (const std::exception&) {
    throw CheckpointError(Code::malformed, "checkpoint: missing counter state." + key);
  }
}

ExperimentConfig config_of(const Checkpoint& c) {
  try {
    return parse_config(c.hyperparameters);
  } catch (const ConfigError& e) {
    throw CheckpointError(Code::malformed, std::string("checkpoint: bad hyperparameters: ") + e.what());
  }
}

std::vector<NamedTensor> tensors_of(const nn::ParameterSet<float>& params) {
  std::vector<NamedTensor> out;
  params.for_each([&](const nn::Parameter<float>& p) {
    NamedTensor t;
    t.name = p.name;
    t.dims = {std::uint32_t(p.value.rows()), std::uint32_t(p.value.cols())};
    t.data.assign(p.value.data(), p.value.data() + p.value.size());
    out.push_back(std::move(t));
  });
  return out;
}

void load_tensors(nn::ParameterSet<float>& params, const std::vector<NamedTensor>& tensors) {
  if (tensors.size() != params.size())
    throw CheckpointError(Code::malformed, "checkpoint: expected " + std::to_string(params.size()) + " tensors, found " +
                                               std::to_string(tensors.size()));
  for (const auto& t : tensors) {
    auto* p = params.find(t.name);
    if (!p) throw CheckpointError(Code::malformed, "checkpoint: unknown tensor '" + t.name + "'");
    if (t.dims.size() != 2 || nn::Index(t.dims[0]) != p->value.rows() || nn::Index(t.dims[1]) != p->value.cols())
      throw CheckpointError(Code::malformed, "checkpoint: tensor '" + t.name + "' has the wrong shape");
    std::memcpy(p->value.data(), t.data.data(), t.data.size() * sizeof(float));
  }
}

void expect_kind(const Checkpoint& c, ModelKind want) {
  if (c.kind != want)
    throw CheckpointError(Code::kind_mismatch, std::string("checkpoint: expected a ") + to_string(want) +
                                                   " model, found " + to_string(c.kind));
}

}  // namespace

const char* to_string(ModelKind k) { return k == ModelKind::gate ? "gate" : "rank"; }

const char* to_string(CheckpointError::Code c) {
  switch (c) {
    case Code::io: return "io";
    case Code::bad_magic: return "bad_magic";
    case Code::version_mismatch: return "version_mismatch";
    case Code::crc_mismatch: return "crc_mismatch";
    case Code::kind_mismatch: return "kind_mismatch";
    case Code::truncated: return "truncated";
    default: return "malformed";
  }
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, std::uint32_t(c.kind));
  put_string(out, c.hyperparameters);
  put_u32(out, std::uint32_t(c.tensors.size()));
  for (const auto& t : c.tensors) {
    std::size_t expected = 1;
    for (auto d : t.dims) expected *= d;
    if (expected != t.data.size())
      throw CheckpointError(Code::malformed, "checkpoint: tensor '" + t.name + "' dims disagree with its data");
    put_string(out, t.name);
    put_u32(out, std::uint32_t(t.dims.size()));
    for (auto d : t.dims) put_u32(out, d);
    for (float f : t.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  put_u32(out, crc_of(out));
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw CheckpointError(Code::bad_magic, "checkpoint: bad magic");
  if (bytes.size() < 16) throw CheckpointError(Code::truncated, "checkpoint: file too short");
  Reader header(bytes.substr(4, 4));
  const std::uint32_t version = header.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(Code::version_mismatch, "checkpoint: version " + std::to_string(version) +
                                                      ", reader supports " + std::to_string(kCheckpointVersion));
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.u32() != crc_of(body)) throw CheckpointError(Code::crc_mismatch, "checkpoint: CRC mismatch");

  Reader r(body.substr(8));
  Checkpoint c;
  const std::uint32_t kind = r.u32();
  if (kind != std::uint32_t(ModelKind::gate) && kind != std::uint32_t(ModelKind::rank))
    throw CheckpointError(Code::malformed, "checkpoint: unknown model kind " + std::to_string(kind));
  c.kind = ModelKind(kind);
  c.hyperparameters = r.string();
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.string();
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      t.dims.push_back(r.u32());
      n *= t.dims.back();
    }
    t.data.reserve(n);
    for (std::size_t k = 0; k < n; ++k) t.data.push_back(r.f32());
    c.tensors.push_back(std::move(t));
  }
  if (!r.done()) throw CheckpointError(Code::malformed, "checkpoint: trailing bytes after tensor table");
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
  const std::string bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(Code::io, "checkpoint: cannot write '" + path + "'");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw CheckpointError(Code::io, "checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, std::optional<ModelKind> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(Code::io, "checkpoint: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  Checkpoint c = decode_checkpoint(buf.str());
  if (expected) expect_kind(c, *expected);
  return c;
}

Checkpoint to_checkpoint(const gate::GateModel& model) {
  ExperimentConfig cfg = default_config();
  cfg.features = model.schema();
  cfg.gate = model.config();
  Checkpoint c;
  c.kind = ModelKind::gate;
  c.hyperparameters = to_ini(cfg, {"features", "gate"}) + state_block({{"step", model.step}});
  c.tensors = tensors_of(model.params());
  return c;
}

Checkpoint to_checkpoint(const rank::RankModel& model) {
  ExperimentConfig cfg = default_config();
  cfg.features = model.schema();
  cfg.rank = model.config();
  Checkpoint c;
  c.kind = ModelKind::rank;
  c.hyperparameters = to_ini(cfg, {"features", "rank"}) +
                      state_block({{"step", model.step}, {"samples_seen", model.samples_seen}});
  c.tensors = tensors_of(model.params());
  return c;
}

gate::GateModel gate_from_checkpoint(const Checkpoint& c) {
  expect_kind(c, ModelKind::gate);
  const ExperimentConfig cfg = config_of(c);
  gate::GateModel model(cfg.gate, cfg.features, 0);
  load_tensors(model.params(), c.tensors);
  model.step = state_counter(c.hyperparameters, "step");
  return model;
}

rank::RankModel rank_from_checkpoint(const Checkpoint& c) {
  expect_kind(c, ModelKind::rank);
  const ExperimentConfig cfg = config_of(c);
  rank::RankModel model(cfg.rank, cfg.features, 0);
  load_tensors(model.params(), c.tensors);
  model.step = state_counter(c.hyperparameters, "step");
  model.samples_seen = state_counter(c.hyperparameters, "samples_seen");
  return model;
}

}  // namespace grf::harness
