#include "grf/harness/records.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace grf::harness {

namespace {

using nlohmann::json;
using features::FeatureRow;
using features::RowLayout;
using features::Sequence;

const char* kFormat = "grf-samples";

std::vector<std::string> column_names(const RowLayout& layout) {
  std::vector<std::string> names = layout.numeric;
  for (const auto& [name, vocab] : layout.categorical) names.push_back(name);
  return names;
}

json row_to_json(const FeatureRow& row, const RowLayout& layout) {
  const auto names = column_names(layout);
  if (row.codes.size() != names.size()) throw RecordError("record: row does not match its layout");
  json j = json::object();
  for (std::size_t i = 0; i < names.size(); ++i) j[names[i]] = row.codes[i];
  if (layout.n_dense > 0) j["dense"] = row.dense;
  return j;
}

FeatureRow row_from_json(const json& j, const RowLayout& layout) {
  FeatureRow row;
  for (const auto& name : column_names(layout)) row.codes.push_back(j.at(name).get<int>());
  if (layout.n_dense > 0) row.dense = j.at("dense").get<std::vector<float>>();
  if (int(row.dense.size()) != layout.n_dense) throw RecordError("record: wrong dense width");
  return row;
}

json seq_to_json(const Sequence& s, const RowLayout& layout) {
  json rows = json::array();
  for (const auto& r : s.rows) rows.push_back(row_to_json(r, layout));
  return {{"rows", rows}, {"mask", s.mask}};
}

Sequence seq_from_json(const json& j, const RowLayout& layout) {
  Sequence s;
  for (const auto& r : j.at("rows")) s.rows.push_back(row_from_json(r, layout));
  s.mask = j.at("mask").get<std::vector<std::uint8_t>>();
  if (s.mask.size() != s.rows.size()) throw RecordError("record: mask length differs from row count");
  return s;
}

json header(const char* kind) { return {{"format", kFormat}, {"version", kRecordSchemaVersion}, {"kind", kind}}; }

void check_header(std::istream& in, const char* kind) {
  std::string line;
  if (!std::getline(in, line)) throw RecordError("record: missing header line");
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw RecordError(std::string("record: unreadable header: ") + e.what());
  }
  if (h.value("format", "") != kFormat) throw RecordError("record: not a sample log");
  if (h.value("version", -1) != kRecordSchemaVersion)
    throw RecordError("record: schema version " + std::to_string(h.value("version", -1)) + ", reader supports " +
                      std::to_string(kRecordSchemaVersion));
  if (h.value("kind", "") != kind) throw RecordError(std::string("record: expected ") + kind + " samples");
}

template <typename Parse>
auto read_lines(std::istream& in, const char* kind, Parse parse) {
  check_header(in, kind);
  std::vector<decltype(parse(json()))> out;
  std::string line;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse(json::parse(line)));
    } catch (const json::exception& e) {
      throw RecordError("record: line " + std::to_string(line_no) + ": " + e.what());
    } catch (const RecordError& e) {
      throw RecordError("record: line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

json labels_to_json(const EngagementLabels& l) { return {l.effective, l.long_view, l.short_view, l.finished}; }

EngagementLabels labels_from_json(const json& j) {
  return {j.at(0).get<bool>(), j.at(1).get<bool>(), j.at(2).get<bool>(), j.at(3).get<bool>()};
}

}  // namespace

void write_gate_records(std::ostream& out, const std::vector<gate::GateSample>& samples) {
  const auto st = features::gate_static_layout(), dy = features::gate_dynamic_layout(),
             ch = features::gate_choppy_layout(), pr = features::gate_prior_layout();
  out << header("gate").dump() << '\n';
  for (const auto& s : samples) {
    json j = {{"static", row_to_json(s.features.static_row, st)},
              {"dynamic", seq_to_json(s.features.dynamic_seq, dy)},
              {"choppy", seq_to_json(s.features.choppy_seq, ch)},
              {"prior", row_to_json(s.features.prior_bias, pr)},
              {"label", s.label}};
    j["bayes_logit"] = std::isnan(s.bayes_logit) ? json(nullptr) : json(s.bayes_logit);
    out << j.dump() << '\n';
  }
}

void write_rank_records(std::ostream& out, const std::vector<rank::RankSample>& samples) {
  const auto tg = features::rank_target_layout(), wa = features::rank_watched_layout(),
             up = features::rank_upcoming_layout(), cx = features::rank_context_layout();
  out << header("rank").dump() << '\n';
  for (const auto& s : samples) {
    const auto& p = s.server_pxtrs;
    json j = {{"target", row_to_json(s.features.target, tg)},
              {"watched", seq_to_json(s.features.watched_seq, wa)},
              {"upcoming", seq_to_json(s.features.upcoming_seq, up)},
              {"context", row_to_json(s.features.context, cx)},
              {"server_pxtrs", {p.evr, p.lvr, p.svr, p.fpr}},
              {"event_time", s.event_time}};
    j["labels"] = s.labels ? labels_to_json(*s.labels) : json(nullptr);
    out << j.dump() << '\n';
  }
}

std::vector<gate::GateSample> read_gate_records(std::istream& in) {
  const auto st = features::gate_static_layout(), dy = features::gate_dynamic_layout(),
             ch = features::gate_choppy_layout(), pr = features::gate_prior_layout();
  return read_lines(in, "gate", [&](const json& j) {
    gate::GateSample s;
    s.features.static_row = row_from_json(j.at("static"), st);
    s.features.dynamic_seq = seq_from_json(j.at("dynamic"), dy);
    s.features.choppy_seq = seq_from_json(j.at("choppy"), ch);
    s.features.prior_bias = row_from_json(j.at("prior"), pr);
    s.label = j.at("label").get<bool>();
    const auto& b = j.at("bayes_logit");
    if (!b.is_null()) s.bayes_logit = b.get<double>();
    return s;
  });
}

std::vector<rank::RankSample> read_rank_records(std::istream& in) {
  const auto tg = features::rank_target_layout(), wa = features::rank_watched_layout(),
             up = features::rank_upcoming_layout(), cx = features::rank_context_layout();
  return read_lines(in, "rank", [&](const json& j) {
    rank::RankSample s;
    s.features.target = row_from_json(j.at("target"), tg);
    s.features.watched_seq = seq_from_json(j.at("watched"), wa);
    s.features.upcoming_seq = seq_from_json(j.at("upcoming"), up);
    s.features.context = row_from_json(j.at("context"), cx);
    const auto& p = j.at("server_pxtrs");
    s.server_pxtrs = {p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(), p.at(3).get<double>()};
    s.event_time = j.at("event_time").get<double>();
    const auto& l = j.at("labels");
    if (!l.is_null()) s.labels = labels_from_json(l);
    return s;
  });
}

void save_gate_records(const std::string& path, const std::vector<gate::GateSample>& samples) {
  std::ofstream out(path);
  if (!out) throw RecordError("record: cannot write '" + path + "'");
  write_gate_records(out, samples);
}

void save_rank_records(const std::string& path, const std::vector<rank::RankSample>& samples) {
  std::ofstream out(path);
  if (!out) throw RecordError("record: cannot write '" + path + "'");
  write_rank_records(out, samples);
}

std::vector<gate::GateSample> load_gate_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RecordError("record: cannot open '" + path + "'");
  return read_gate_records(in);
}

std::vector<rank::RankSample> load_rank_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw RecordError("record: cannot open '" + path + "'");
  return read_rank_records(in);
}

}  // namespace grf::harness
