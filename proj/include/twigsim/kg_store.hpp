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

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace twigsim::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
  EntityId subject = 0;
  RelationId predicate = 0;
  EntityId object = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct NamedTriple {
  std::string subject;
  std::string predicate;
  std::string object;
};

// Entity and relation vocabularies are the sorted union of names across all
// three splits. Ids index into the sorted name lists.
struct KnowledgeGraph {
  std::vector<std::string> entity_names;
  std::vector<std::string> relation_names;
  std::vector<Triple> train;
  std::vector<Triple> valid;
  std::vector<Triple> test;

  std::size_t num_entities() const { return entity_names.size(); }
  std::size_t num_relations() const { return relation_names.size(); }
  std::size_t num_triples() const {
    return train.size() + valid.size() + test.size();
  }
};

// Parses a tab-separated triple file. Blank lines and lines starting with '#'
// are skipped. Throws DataError on a missing file or a malformed line.
std::vector<NamedTriple> read_triple_file(const std::filesystem::path& path);

// Builds vocabularies and id-encoded splits. Throws DataError when the train
// split is empty.
KnowledgeGraph build_graph(std::span<const NamedTriple> train,
                           std::span<const NamedTriple> valid,
                           std::span<const NamedTriple> test);

KnowledgeGraph load_graph(const std::filesystem::path& train_path,
                          const std::filesystem::path& valid_path,
                          const std::filesystem::path& test_path);

// Degree and frequency statistics over the train split only. Duplicate
// triples count with multiplicity; a self-loop adds two to its entity's
// degree.
// Fingerprint of the validation split in file order; run records carry it so
// rank lists from different graphs or orderings are never compared.
std::string query_order_hash(const KnowledgeGraph& graph);

class StructIndex {
 public:
  StructIndex() = default;
  explicit StructIndex(const KnowledgeGraph& graph);

  std::size_t num_entities() const { return degree_.size(); }
  std::size_t num_relations() const { return rel_freq_.size(); }

  std::uint32_t degree(EntityId e) const { return degree_[e]; }
  std::uint32_t rel_freq(RelationId r) const { return rel_freq_[r]; }
  std::uint32_t sp_cofreq(EntityId s, RelationId p) const;
  std::uint32_t op_cofreq(EntityId o, RelationId p) const;
  // Directed: counts train triples with subject s and object o.
  std::uint32_t so_cofreq(EntityId s, EntityId o) const;

  // Sorted, distinct adjacent entities.
  const std::vector<EntityId>& neighbours(EntityId e) const {
    return neighbours_[e];
  }
  // Sorted multiset; one entry per incident train edge (two for self-loops).
  const std::vector<RelationId>& incident_rels(EntityId e) const {
    return incident_rels_[e];
  }
  // Number of distinct relations among incident_rels(e).
  std::size_t num_distinct_rels(EntityId e) const {
    return distinct_rels_[e];
  }

  std::span<const std::uint32_t> degrees() const { return degree_; }

  // Canonical text dump of every index value; equal indices give equal text.
  std::string dump() const;

 private:
  static std::uint64_t key(std::uint32_t a, std::uint32_t b) {
    return (static_cast<std::uint64_t>(a) << 32) | b;
  }
  static std::uint32_t lookup(
      const std::unordered_map<std::uint64_t, std::uint32_t>& map,
      std::uint64_t k);

  std::vector<std::uint32_t> degree_;
  std::vector<std::uint32_t> rel_freq_;
  std::unordered_map<std::uint64_t, std::uint32_t> sp_cofreq_;
  std::unordered_map<std::uint64_t, std::uint32_t> op_cofreq_;
  std::unordered_map<std::uint64_t, std::uint32_t> so_cofreq_;
  std::vector<std::vector<EntityId>> neighbours_;
  std::vector<std::vector<RelationId>> incident_rels_;
  std::vector<std::size_t> distinct_rels_;
};

}  // namespace twigsim::kg
