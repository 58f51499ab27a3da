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

// Shared helpers for the unit tests.

#pragma once

#include <filesystem>
#include <string>

#include "twigsim/kg_store.hpp"

namespace twigsim::testing {

inline std::filesystem::path source_dir() { return TWIGSIM_SOURCE_DIR; }

inline std::filesystem::path toy_dir() {
  return source_dir() / "tests" / "fixtures" / "toy";
}

inline std::filesystem::path umls_dir() { return source_dir() / "data" / "umls"; }

inline kg::KnowledgeGraph load_dir(const std::filesystem::path& dir) {
  return kg::load_graph(dir / "train.tsv", dir / "valid.tsv", dir / "test.tsv");
}

inline kg::KnowledgeGraph toy_graph() { return load_dir(toy_dir()); }
inline kg::KnowledgeGraph umls_graph() { return load_dir(umls_dir()); }

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::path(TWIGSIM_BINARY_DIR) / "test_scratch" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace twigsim::testing
