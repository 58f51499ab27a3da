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

#include "twigsim/grid_runner.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <mutex>
#include <thread>

namespace twigsim::kge {

std::uint64_t task_seed(int seed, std::size_t config_index) {
  return mix_seed(static_cast<std::uint64_t>(seed), config_index);
}

RunRecord run_task(const kg::KnowledgeGraph& graph, const GridTask& task,
                   const KgeSettings& settings, RankingMode ranking) {
  const auto start = std::chrono::steady_clock::now();
  const TrainResult trained = train_kge(
      graph, task.config, task_seed(task.seed, task.config_index), settings);
  RunRecord r;
  if (trained.diverged) {
    r.config = task.config;
    r.config_index = task.config_index;
    r.seed = task.seed;
    r.status = RunStatus::kFailed;
    r.failure = trained.failure;
  } else {
    r = evaluate_run(trained.embeddings, graph, ranking, task.config,
                     task.config_index, task.seed);
  }
  r.metadata = {{"kge", settings.to_json()},
                {"ranking", to_string(ranking)},
                {"epochs_completed", trained.epochs_completed},
                {"query_order", kg::query_order_hash(graph)}};
  r.wall_time_s = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - start)
                      .count();
  return r;
}

GridSummary run_grid(const kg::KnowledgeGraph& graph,
                     std::span<const GridTask> tasks,
                     const std::filesystem::path& out_dir,
                     const GridOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  GridSummary summary;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;

  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const GridTask& task = tasks[i];
      try {
        const auto path = out_dir / run_file_name(task.config_index, task.seed);
        if (options.resume && std::filesystem::exists(path)) {
          const RunRecord existing = read_run(path);
          if (existing.ok() && existing.config == task.config) {
            validate(existing, graph.num_entities());
            std::lock_guard lock(mu);
            ++summary.reused;
            if (options.on_finished) options.on_finished(existing);
            continue;
          }
        }
        const RunRecord r = run_task(graph, task, options.settings,
                                     options.ranking);
        write_run(r, out_dir);
        std::lock_guard lock(mu);
        if (r.ok()) {
          ++summary.completed;
        } else {
          ++summary.failed;
        }
        if (options.on_finished) options.on_finished(r);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    }
  };

  const std::size_t n = std::max<std::size_t>(1, options.workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  summary.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  return summary;
}

}  // namespace twigsim::kge
