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

#include <bit>
#include <fstream>

#include "twigsim/errors.hpp"
#include "twigsim/features.hpp"

namespace twigsim::features {

static_assert(std::endian::native == std::endian::little,
              "dataset blocks are written as little-endian float64");

namespace {

constexpr int kFormatVersion = 1;
constexpr std::size_t kBlockWidth = kRowWidth + 1;

std::filesystem::path block_path(const std::filesystem::path& dir,
                                 const Batch& b) {
  return dir / (b.name() + ".bin");
}

}  // namespace

void write_dataset(const FeatureDataset& dataset,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json meta;
  meta["format_version"] = kFormatVersion;
  meta["feature_names"] = row_feature_names();
  meta["num_entities"] = dataset.num_entities;
  meta["num_queries"] = dataset.num_queries();
  meta["holdout_seed"] = dataset.holdout_seed
                             ? nlohmann::json(*dataset.holdout_seed)
                             : nlohmann::json(nullptr);
  meta["standardizer"] = dataset.standardizer;
  meta["failed_runs_excluded"] = dataset.failed_runs_excluded;
  meta["provenance"] = dataset.provenance;
  nlohmann::json batches = nlohmann::json::array();
  nlohmann::json grid_order = nlohmann::json::array();
  for (const Batch& b : dataset.batches) {
    batches.push_back({{"name", b.name()},
                       {"config_index", b.config_index},
                       {"seed", b.seed},
                       {"config", b.config},
                       {"holdout", b.holdout},
                       {"true_mrr", b.true_mrr},
                       {"rows", b.rows()}});
    if (grid_order.empty() || b.seed == dataset.batches.front().seed) {
      grid_order.push_back(b.config_index);
    }
    std::vector<double> block;
    block.reserve(b.rows() * kBlockWidth);
    const auto rows = dataset.raw_rows(b);
    for (std::size_t i = 0; i < b.rows(); ++i) {
      block.insert(block.end(), rows.begin() + i * kRowWidth,
                   rows.begin() + (i + 1) * kRowWidth);
      block.push_back(b.target_ranks[i]);
    }
    std::ofstream out(block_path(dir, b), std::ios::binary);
    if (!out) throw DataError("cannot write " + block_path(dir, b).string());
    out.write(reinterpret_cast<const char*>(block.data()),
              static_cast<std::streamsize>(block.size() * sizeof(double)));
  }
  meta["batches"] = std::move(batches);
  meta["grid_order"] = std::move(grid_order);
  std::ofstream out(dir / "meta.json");
  if (!out) throw DataError("cannot write " + (dir / "meta.json").string());
  out << meta.dump(1) << '\n';
}

FeatureDataset read_dataset(const std::filesystem::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) throw DataError("dataset not found: " + dir.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad dataset meta.json: " + std::string(e.what()));
  }
  if (meta.at("format_version").get<int>() != kFormatVersion) {
    throw DataError("unsupported dataset format version");
  }
  if (meta.at("feature_names").get<std::vector<std::string>>() !=
      row_feature_names()) {
    throw DataError("dataset feature names do not match this build");
  }
  FeatureDataset ds;
  ds.num_entities = meta.at("num_entities").get<std::size_t>();
  if (!meta.at("holdout_seed").is_null()) {
    ds.holdout_seed = meta.at("holdout_seed").get<int>();
  }
  ds.standardizer = meta.at("standardizer").get<Standardizer>();
  ds.failed_runs_excluded = meta.at("failed_runs_excluded").get<std::size_t>();
  ds.provenance = meta.value("provenance", nlohmann::json::object());
  const std::size_t q = meta.at("num_queries").get<std::size_t>();

  for (const auto& jb : meta.at("batches")) {
    Batch b;
    b.config_index = jb.at("config_index").get<std::size_t>();
    b.seed = jb.at("seed").get<int>();
    b.config = jb.at("config").get<HyperparamConfig>();
    b.holdout = jb.at("holdout").get<bool>();
    b.true_mrr = jb.at("true_mrr").get<double>();
    if (jb.at("rows").get<std::size_t>() != q) {
      throw DataError("batch " + b.name() + " row count mismatch");
    }
    const auto path = block_path(dir, b);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("missing batch block " + path.string());
    std::vector<double> block(q * kBlockWidth);
    in.read(reinterpret_cast<char*>(block.data()),
            static_cast<std::streamsize>(block.size() * sizeof(double)));
    if (in.gcount() !=
        static_cast<std::streamsize>(block.size() * sizeof(double))) {
      throw DataError("truncated batch block " + path.string());
    }
    const bool first = ds.query_features.empty();
    for (std::size_t i = 0; i < q; ++i) {
      const double* row = block.data() + i * kBlockWidth;
      for (std::size_t c = 0; c < kStructFeatureCount; ++c) {
        if (first) {
          ds.query_features.push_back(row[c]);
        } else if (ds.query_features[i * kStructFeatureCount + c] != row[c]) {
          throw DataError("batch " + b.name() +
                          " disagrees with the shared structural block");
        }
      }
      for (std::size_t c = 0; c < kHypFeatureCount; ++c) {
        const double v = row[kStructFeatureCount + c];
        if (i == 0) {
          b.hyp[c] = v;
        } else if (b.hyp[c] != v) {
          throw DataError("batch " + b.name() +
                          " has non-constant hyperparameter columns");
        }
      }
      b.target_ranks.push_back(row[kRowWidth]);
    }
    ds.batches.push_back(std::move(b));
  }
  return ds;
}

}  // namespace twigsim::features
