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

#include "cfeval/importance.hpp"

#include <algorithm>
#include <numeric>

namespace cfeval {

namespace {

ImportanceVector score_rows(const EvalMatrix& matrix, std::span<const Eigen::Index> rows,
                            ImportanceKind kind) {
  ImportanceVector out;
  out.task_id = matrix.task_id;
  std::vector<Eigen::Index> idx(rows.begin(), rows.end());
  for (auto r : idx) {
    if (r < 0 || r >= matrix.values.rows()) throw ArgumentError("model row out of range");
    out.model_set_ids.push_back(matrix.model_ids[static_cast<std::size_t>(r)]);
  }
  out.scores = column_importance(matrix.values(idx, Eigen::all), kind);
  return out;
}

}  // namespace

ImportanceVector variance_importance(const EvalMatrix& matrix,
                                     std::span<const Eigen::Index> model_rows) {
  return score_rows(matrix, model_rows, ImportanceKind::kVariance);
}

ImportanceVector binary_importance(const EvalMatrix& matrix,
                                   std::span<const Eigen::Index> model_rows) {
  return score_rows(matrix, model_rows, ImportanceKind::kBinaryCount);
}

ImportanceVector combined_importance(const ImportanceVector& base,
                                     const ImportanceVector& similar, double weight_alpha) {
  if (base.scores.size() != similar.scores.size()) {
    throw ArgumentError("combined_importance: length mismatch");
  }
  if (base.task_id != similar.task_id) {
    throw ArgumentError("combined_importance: vectors belong to different tasks");
  }
  if (!(weight_alpha >= 0.0 && weight_alpha <= 1.0)) {
    throw ArgumentError("combined_importance: weight_alpha must lie in [0,1]");
  }
  ImportanceVector out;
  out.task_id = base.task_id;
  out.model_set_ids = base.model_set_ids;
  // Exact endpoints: 0 * inf-like caps must not leak in.
  if (weight_alpha == 1.0) {
    out.scores = base.scores;
  } else if (weight_alpha == 0.0) {
    out.scores = similar.scores;
  } else {
    out.scores = weight_alpha * base.scores + (1.0 - weight_alpha) * similar.scores;
  }
  return out;
}

std::vector<Eigen::Index> top_k_indices(const Eigen::VectorXd& scores, std::size_t k,
                                        const std::vector<bool>* excluded) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (excluded && (*excluded)[static_cast<std::size_t>(j)]) continue;
    idx.push_back(j);
  }
  k = std::min(k, idx.size());
  auto by_score = [&](Eigen::Index a, Eigen::Index b) {
    return scores(a) > scores(b) || (scores(a) == scores(b) && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                    by_score);
  idx.resize(k);
  return idx;
}

}  // namespace cfeval
