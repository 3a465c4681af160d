// Copyright 2026 The cfeval Authors.
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

// Reference subset-evaluation methods: uniform random sampling and k-means
// clustering with size-weighted representative scores.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cfeval {

// Seed of the per-task stream derived from a run seed.
constexpr std::uint64_t task_stream_seed(std::uint64_t seed, std::size_t task) {
  return seed * 1000003ULL + static_cast<std::uint64_t>(task);
}

// Sorted column indices of a uniform sample without replacement.
std::vector<Eigen::Index> random_select(std::size_t task_size, std::size_t budget,
                                        std::uint64_t seed);
double random_predict(std::span<const double> values);

struct ClusterConfig {
  std::size_t restarts = 5;
  std::size_t max_iterations = 300;
};

struct ClusterModel {
  std::string task_id;
  std::size_t k = 0;
  std::vector<std::size_t> assignments;           // per instance
  std::vector<Eigen::Index> representatives;      // per cluster, instance index
  std::vector<std::size_t> sizes;                 // per cluster
  double objective = 0.0;                         // within-cluster sum of squares
  // Objective after each Lloyd iteration of the kept restart.
  std::vector<double> objective_trace;
};

// `features` holds one column per instance.
ClusterModel cluster_select(const Eigen::MatrixXd& features, std::size_t k, std::uint64_t seed,
                            const ClusterConfig& cfg = {});

// Size-weighted mean of representative values, aligned with
// model.representatives.
double cluster_predict(const ClusterModel& model, std::span<const double> values);

// Reads a CSV with header task_id,instance_id,<f1>,...,<fd> and returns the
// rows of `task_id` as columns in `instance_ids` order. Every instance must
// appear exactly once.
Eigen::MatrixXd load_instance_features(const std::filesystem::path& path,
                                       const std::string& task_id,
                                       std::span<const std::string> instance_ids);

}  // namespace cfeval
