// Bag and dataset JSONL interchange.
//
// Bag files: one bag per line,
//   {"head_cui", "tail_cui", "label", "instances": [instance, ...]}
// where an instance is
//   {"doc_id", "section", "sentence", "distance": "short"|"long",
//    "title_tokens", "heading_tokens", "sentence_tokens",
//    "e1": {"cui", "span": [start, end], "in_title"}, "e2": {...}}
// Decompositions are recomputed from the spans on load.
//
// Dataset files: a header line
//   {"format_version": 1, "negative_kind", "seed", "split_fraction", "bags": N}
// followed by N bag lines that each carry an extra "split": "train"|"test".

#include <string>

#include "dsre/sampling.h"
#include "json.hpp"

namespace dsre {
namespace {

using nlohmann::json;

json entity_to_json(const EntityRef& e) {
  return {{"cui", e.cui}, {"span", {e.span.start, e.span.end}}, {"in_title", e.in_title}};
}

EntityRef entity_from_json(const json& j) {
  return {j.at("cui").get<std::string>(), {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()},
          j.value("in_title", false)};
}

json bag_to_json(const Bag& bag) {
  json instances = json::array();
  for (const auto& i : bag.instances) {
    instances.push_back({{"doc_id", i.doc_id},
                         {"section", i.section},
                         {"sentence", i.sentence},
                         {"distance", i.distance == Distance::kShort ? "short" : "long"},
                         {"title_tokens", i.title_tokens},
                         {"heading_tokens", i.heading_tokens},
                         {"sentence_tokens", i.sentence_tokens},
                         {"e1", entity_to_json(i.e1)},
                         {"e2", entity_to_json(i.e2)}});
  }
  return {{"head_cui", bag.head_cui}, {"tail_cui", bag.tail_cui}, {"label", bag.label}, {"instances", instances}};
}

Bag bag_from_json(const json& j) {
  Bag bag;
  bag.head_cui = j.at("head_cui").get<std::string>();
  bag.tail_cui = j.at("tail_cui").get<std::string>();
  bag.label = j.at("label").get<std::string>();
  for (const auto& ij : j.at("instances")) {
    Instance i;
    i.doc_id = ij.at("doc_id").get<std::string>();
    i.section = ij.at("section").get<std::size_t>();
    i.sentence = ij.at("sentence").get<std::size_t>();
    std::string d = ij.at("distance").get<std::string>();
    if (d != "short" && d != "long") throw ValidationError("distance must be short or long");
    i.distance = d == "short" ? Distance::kShort : Distance::kLong;
    i.title_tokens = ij.at("title_tokens").get<Tokens>();
    i.heading_tokens = ij.at("heading_tokens").get<Tokens>();
    i.sentence_tokens = ij.at("sentence_tokens").get<Tokens>();
    i.e1 = entity_from_json(ij.at("e1"));
    i.e2 = entity_from_json(ij.at("e2"));
    i.decomposition = decomposition_of(i);
    bag.instances.push_back(std::move(i));
  }
  if (bag.instances.empty()) throw ValidationError("bag has no instances");
  return bag;
}

template <typename Fn>
void for_each_json_line(std::string_view text, const std::string& origin, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (trim(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw ParseError(origin, line_no, "invalid JSON");
    try {
      fn(line_no, j);
    } catch (const json::exception& e) {
      throw ParseError(origin, line_no, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(origin, line_no, e.what());
    }
  }
}

}  // namespace

std::string serialize_bags(const std::vector<Bag>& bags) {
  std::string out;
  for (const auto& b : bags) {
    out += bag_to_json(b).dump();
    out += '\n';
  }
  return out;
}

std::vector<Bag> parse_bags(std::string_view jsonl, const std::string& origin) {
  std::vector<Bag> bags;
  for_each_json_line(jsonl, origin, [&](std::size_t, const json& j) { bags.push_back(bag_from_json(j)); });
  return bags;
}

std::string serialize_dataset(const Dataset& ds) {
  json header = {{"format_version", kDatasetFormatVersion},
                 {"negative_kind", std::string(to_string(ds.negative_kind))},
                 {"seed", ds.seed},
                 {"split_fraction", ds.split_fraction},
                 {"bags", ds.bags.size()}};
  std::string out = header.dump() + '\n';
  for (std::size_t i = 0; i < ds.bags.size(); ++i) {
    json b = bag_to_json(ds.bags[i]);
    b["split"] = std::string(to_string(ds.split[i]));
    out += b.dump();
    out += '\n';
  }
  return out;
}

Dataset parse_dataset(std::string_view jsonl, const std::string& origin) {
  Dataset ds;
  bool header = false;
  std::size_t expected = 0;
  for_each_json_line(jsonl, origin, [&](std::size_t line_no, const json& j) {
    if (!header) {
      int version = j.at("format_version").get<int>();
      if (version != kDatasetFormatVersion)
        throw ParseError(origin, line_no, "unsupported dataset format_version " + std::to_string(version));
      ds.negative_kind = parse_negative_kind(j.at("negative_kind").get<std::string>());
      ds.seed = j.at("seed").get<std::uint64_t>();
      ds.split_fraction = j.at("split_fraction").get<double>();
      expected = j.at("bags").get<std::size_t>();
      header = true;
      return;
    }
    ds.bags.push_back(bag_from_json(j));
    std::string s = j.at("split").get<std::string>();
    if (s != "train" && s != "test") throw ParseError(origin, line_no, "split must be train or test");
    ds.split.push_back(s == "train" ? Split::kTrain : Split::kTest);
  });
  if (!header) throw ParseError(origin, 1, "missing dataset header line");
  if (ds.bags.size() != expected)
    throw ParseError(origin, ds.bags.size() + 1, "header announces " + std::to_string(expected) + " bags, found " +
                                                     std::to_string(ds.bags.size()));
  return ds;
}

}  // namespace dsre
