// Copyright 2026 The twigsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "twigsim/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>
#include <string_view>

#include "twigsim/errors.hpp"
#include "twigsim/hash.hpp"

namespace twigsim::kg {

std::vector<NamedTriple> read_triple_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing triple file: " + path.string());
  std::vector<NamedTriple> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.emplace_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() ||
        fields[2].empty()) {
      throw DataError("malformed line " + std::to_string(line_no) + " in " +
                      path.string() + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
    }
    out.push_back({std::move(fields[0]), std::move(fields[1]),
                   std::move(fields[2])});
  }
  return out;
}

namespace {

std::vector<std::string> sorted_unique(std::vector<std::string> names) {
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  return names;
}

std::uint32_t id_of(const std::vector<std::string>& vocab,
                    const std::string& name) {
  const auto it = std::lower_bound(vocab.begin(), vocab.end(), name);
  return static_cast<std::uint32_t>(it - vocab.begin());
}

}  // namespace

KnowledgeGraph build_graph(std::span<const NamedTriple> train,
                           std::span<const NamedTriple> valid,
                           std::span<const NamedTriple> test) {
  if (train.empty()) throw DataError("empty train split");
  std::vector<std::string> entities;
  std::vector<std::string> relations;
  for (auto split : {train, valid, test}) {
    for (const auto& t : split) {
      entities.push_back(t.subject);
      entities.push_back(t.object);
      relations.push_back(t.predicate);
    }
  }
  KnowledgeGraph g;
  g.entity_names = sorted_unique(std::move(entities));
  g.relation_names = sorted_unique(std::move(relations));
  auto encode = [&](std::span<const NamedTriple> split) {
    std::vector<Triple> out;
    out.reserve(split.size());
    for (const auto& t : split) {
      out.push_back({id_of(g.entity_names, t.subject),
                     id_of(g.relation_names, t.predicate),
                     id_of(g.entity_names, t.object)});
    }
    return out;
  };
  g.train = encode(train);
  g.valid = encode(valid);
  g.test = encode(test);
  return g;
}

KnowledgeGraph load_graph(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path,
                          const std::filesystem::path& test_path) {
  const auto train = read_triple_file(train_path);
  const auto valid = read_triple_file(valid_path);
  const auto test = read_triple_file(test_path);
  if (train.empty()) {
    throw DataError("empty train split: " + train_path.string());
  }
  return build_graph(train, valid, test);
}

StructIndex::StructIndex(const KnowledgeGraph& graph)
    : degree_(graph.num_entities(), 0),
      rel_freq_(graph.num_relations(), 0),
      neighbours_(graph.num_entities()),
      incident_rels_(graph.num_entities()),
      distinct_rels_(graph.num_entities(), 0) {
  for (const Triple& t : graph.train) {
    ++degree_[t.subject];
    ++degree_[t.object];
    ++rel_freq_[t.predicate];
    ++sp_cofreq_[key(t.subject, t.predicate)];
    ++op_cofreq_[key(t.object, t.predicate)];
    ++so_cofreq_[key(t.subject, t.object)];
    neighbours_[t.subject].push_back(t.object);
    neighbours_[t.object].push_back(t.subject);
    incident_rels_[t.subject].push_back(t.predicate);
    incident_rels_[t.object].push_back(t.predicate);
  }
  for (std::size_t e = 0; e < neighbours_.size(); ++e) {
    auto& n = neighbours_[e];
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
    auto& r = incident_rels_[e];
    std::sort(r.begin(), r.end());
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i == 0 || r[i] != r[i - 1]) ++distinct;
    }
    distinct_rels_[e] = distinct;
  }
}

std::uint32_t StructIndex::lookup(
    const std::unordered_map<std::uint64_t, std::uint32_t>& map,
    std::uint64_t k) {
  const auto it = map.find(k);
  return it == map.end() ? 0 : it->second;
}

std::uint32_t StructIndex::sp_cofreq(EntityId s, RelationId p) const {
  return lookup(sp_cofreq_, key(s, p));
}

std::uint32_t StructIndex::op_cofreq(EntityId o, RelationId p) const {
  return lookup(op_cofreq_, key(o, p));
}

std::uint32_t StructIndex::so_cofreq(EntityId s, EntityId o) const {
  return lookup(so_cofreq_, key(s, o));
}

std::string StructIndex::dump() const {
  std::ostringstream out;
  auto dump_map = [&](std::string_view name,
                      const std::unordered_map<std::uint64_t, std::uint32_t>& m) {
    const std::map<std::uint64_t, std::uint32_t> ordered(m.begin(), m.end());
    out << name << ' ' << ordered.size() << '\n';
    for (const auto& [k, v] : ordered) {
      out << (k >> 32) << ' ' << (k & 0xffffffffULL) << ' ' << v << '\n';
    }
  };
  out << "degree";
  for (auto d : degree_) out << ' ' << d;
  out << "\nrel_freq";
  for (auto f : rel_freq_) out << ' ' << f;
  out << '\n';
  dump_map("sp", sp_cofreq_);
  dump_map("op", op_cofreq_);
  dump_map("so", so_cofreq_);
  for (std::size_t e = 0; e < neighbours_.size(); ++e) {
    out << "n " << e << ':';
    for (auto n : neighbours_[e]) out << ' ' << n;
    out << " | r:";
    for (auto r : incident_rels_[e]) out << ' ' << r;
    out << '\n';
  }
  return out.str();
}

std::string query_order_hash(const KnowledgeGraph& graph) {
  Fnv1a h;
  for (const Triple& t : graph.valid) {
    h.update(graph.entity_names[t.subject]);
    h.update("\t");
    h.update(graph.relation_names[t.predicate]);
    h.update("\t");
    h.update(graph.entity_names[t.object]);
    h.update("\n");
  }
  return h.hex();
}

}  // namespace twigsim::kg
