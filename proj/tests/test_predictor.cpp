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

#include <doctest.h>

#include <array>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cfeval/generator.hpp"
#include "cfeval/predictor.hpp"
#include "cfeval/report.hpp"
#include "oracles.hpp"

using namespace cfeval;

namespace {

BenchmarkStore store_of(const std::vector<Eigen::MatrixXd>& tasks, MetricKind kind) {
  std::vector<ModelRecord> models;
  for (Eigen::Index r = 0; r < tasks.front().rows(); ++r) {
    models.push_back({"m" + std::to_string(r), static_cast<std::int64_t>(r), ""});
  }
  std::vector<TaskRecord> recs;
  std::vector<EvalMatrix> mats;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    TaskRecord rec{"t" + std::to_string(t), {}, kind};
    for (Eigen::Index c = 0; c < tasks[t].cols(); ++c) {
      rec.instance_ids.push_back("x" + std::to_string(100 + c));
    }
    EvalMatrix m{rec.task_id, {}, rec.instance_ids, tasks[t]};
    for (const auto& mr : models) m.model_ids.push_back(mr.model_id);
    recs.push_back(rec);
    mats.push_back(m);
  }
  return BenchmarkStore::create(models, recs, mats);
}

// Hand-made selection of `cols` with the target row's true values.
SelectionState hand_selection(const BenchmarkStore& store, const std::string& task,
                              const std::vector<Eigen::Index>& cols, Eigen::Index target_row,
                              const std::vector<std::string>& similar) {
  const auto& m = store.matrix(task);
  SelectionState s;
  s.task_id = task;
  s.budget = cols.size();
  for (auto c : cols) {
    s.probe_ids.push_back(m.instance_ids[static_cast<std::size_t>(c)]);
    s.probe_values.push_back(m.values(target_row, c));
  }
  s.similar_model_ids = similar;
  return s;
}

std::vector<Eigen::Index> range(Eigen::Index lo, Eigen::Index hi) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = lo; i < hi; ++i) out.push_back(i);
  return out;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_SUITE("predictor") {
  TEST_CASE("constant unselected columns are all filtered") {
    std::mt19937_64 rng(1);
    const auto sel = oracle::random_matrix(rng, 5, 4, false);
    Eigen::MatrixXd uns(5, 3);
    uns.col(0).setConstant(0.25);
    uns.col(1).setConstant(1.0);
    uns.col(2).setZero();
    for (double tau1 : {0.5, 2.0, 1e6}) {
      const auto f = filter_unimportant(sel, uns, tau1);
      CHECK(f.filtered.size() == 3);
      CHECK(f.kept.empty());
      CHECK(f.c0 == doctest::Approx(1.25));
    }
  }

  TEST_CASE("huge tau1 filters only zero-variance columns") {
    std::mt19937_64 rng(2);
    const auto sel = oracle::random_matrix(rng, 5, 4, false);
    auto uns = oracle::random_matrix(rng, 5, 6, false);
    uns.col(3).setConstant(0.5);
    const auto f = filter_unimportant(sel, uns, 1e300);
    CHECK(f.filtered == std::vector<Eigen::Index>{3});
    CHECK(f.kept.size() == 5);
  }

  TEST_CASE("filtering matches the brute-force rule") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 150; ++trial) {
      const bool binary = trial % 3 == 0;
      const auto sel = oracle::random_matrix(rng, 5, 4 + trial % 5, binary);
      auto uns = oracle::random_matrix(rng, 5, 10, binary);
      // Shrink some columns toward their mean so both outcomes occur.
      for (Eigen::Index j = 0; j < uns.cols(); j += 2) {
        if (!binary) uns.col(j) = (uns.col(j).array() * 0.2 + 0.4).matrix();
      }
      const double tau1 = trial == 0 ? 2.0 : std::uniform_real_distribution<double>(0.5, 8.0)(rng);
      const auto got = filter_unimportant(sel, uns, tau1);
      const auto want = oracle::reference_filter(sel, uns, tau1);
      CHECK(got.filtered == want.filtered);
      CHECK(got.c0 == doctest::Approx(want.c0).epsilon(1e-10));
      CHECK(got.filtered.size() + got.kept.size() == 10);
    }
  }

  TEST_CASE("nearest-rank quantile") {
    CHECK(nearest_rank_quantile({0.3, 0.1, 0.2}, 0.5) == 0.2);
    CHECK(nearest_rank_quantile({0.3, 0.1, 0.2, 0.4}, 0.5) == 0.2);
    CHECK(nearest_rank_quantile({0.3, 0.1}, 0.0) == 0.1);
    CHECK(nearest_rank_quantile({0.3, 0.1}, 1.0) == 0.3);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<double> v(1 + trial % 17);
      for (auto& x : v) x = std::uniform_real_distribution<double>(0, 1)(rng);
      const double q = (trial % 11) / 10.0;
      CHECK(nearest_rank_quantile(v, q) == oracle::nearest_rank(v, q));
    }
    CHECK_THROWS_AS(nearest_rank_quantile({}, 0.5), ArgumentError);
  }

  TEST_CASE("an exact duplicate of a perfect probe predicts 1") {
    std::mt19937_64 rng(5);
    auto sel = oracle::random_matrix(rng, 6, 5, false);
    Eigen::VectorXd target = Eigen::VectorXd::Constant(5, 0.0);
    PredictorConfig cfg;
    // Three copies of the unselected column among the probes.
    Eigen::MatrixXd uns = sel.col(0);
    sel.col(1) = sel.col(0);
    sel.col(2) = sel.col(0);
    target(0) = target(1) = target(2) = 1.0;
    const std::vector<Eigen::Index> similar = {0, 1};
    const auto r = route_and_predict(sel, uns, target, similar, cfg);
    REQUIRE(r.audit.size() == 1);
    CHECK(r.audit[0].branch == Branch::kItem);
    CHECK(r.audit[0].mean_similarity == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.audit[0].prediction == 1.0);
    CHECK(r.c1 == 1.0);
  }

  TEST_CASE("tau2 of 1 without perfect similarity routes everything to users") {
    std::mt19937_64 rng(6);
    const auto sel = oracle::random_matrix(rng, 6, 8, false);
    const auto uns = oracle::random_matrix(rng, 6, 4, false);
    PredictorConfig cfg;
    cfg.tau2 = 1.0;
    const std::vector<Eigen::Index> similar = {1, 3, 5};
    const auto r = route_and_predict(sel, uns, Eigen::VectorXd::Ones(8), similar, cfg);
    CHECK(r.c1 == 0.0);
    CHECK(r.n_user == 4);
    double c2 = 0.0;
    for (Eigen::Index j = 0; j < 4; ++j) c2 += (uns(1, j) + uns(3, j) + uns(5, j)) / 3.0;
    CHECK(r.c2 == doctest::Approx(c2).epsilon(1e-12));
  }

  TEST_CASE("routing matches the straight-line reference") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 150; ++trial) {
      const bool binary = trial % 2 == 1;
      const auto sel = oracle::random_matrix(rng, 6, 8, binary);
      const auto uns = oracle::random_matrix(rng, 6, 4, binary);
      std::vector<double> target(8);
      for (auto& x : target) x = binary ? double(std::bernoulli_distribution(0.6)(rng)) : std::uniform_real_distribution<double>(0, 1)(rng);
      PredictorConfig cfg;
      cfg.tau2 = std::array{0.0, 0.5, 0.9}[static_cast<std::size_t>(trial % 3)];
      cfg.quantile_q = (trial % 5) / 4.0;
      cfg.k_items = static_cast<std::size_t>(1 + trial % 4);
      std::vector<Eigen::Index> similar = {0, 2, 4};
      if (trial % 4 == 0) similar = {5};
      const auto got = route_and_predict(sel, uns, Eigen::Map<Eigen::VectorXd>(target.data(), 8),
                                         similar, cfg);
      const auto want =
          oracle::reference_routing(sel, uns, target, similar, cfg.tau2, cfg.quantile_q, cfg.k_items);
      CHECK(got.tau3 == doctest::Approx(want.tau3).epsilon(1e-12));
      CHECK(got.c1 == doctest::Approx(want.c1).epsilon(1e-10));
      CHECK(got.c2 == doctest::Approx(want.c2).epsilon(1e-10));
      REQUIRE(got.audit.size() == want.branch.size());
      for (std::size_t j = 0; j < want.branch.size(); ++j) {
        CHECK((got.audit[j].branch == Branch::kItem ? 1 : 2) == want.branch[j]);
      }
    }
  }

  TEST_CASE("score assembly") {
    PredictorConfig cfg;
    ScoreComponents parts{8.0, 0.0, 1.5, 2.0, 0.5};
    ScoreCounts counts{10, 10, 0, 3, 4, 3};
    CHECK(assemble_score(parts, counts, cfg) == doctest::Approx(0.6).epsilon(1e-15));
    ScoreComponents full{7.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(assemble_score(full, ScoreCounts{20, 0, 0, 0, 0, 0}, cfg) == 0.35);
    counts.n_user_cf = 2;
    CHECK_THROWS_AS(assemble_score(parts, counts, cfg), ArgumentError);
    // Synthetic columns count only in literal mode.
    ScoreComponents syn{8.0, 4.0, 1.5, 2.0, 0.5};
    ScoreCounts with_syn{10, 10, 5, 3, 4, 3};
    CHECK(assemble_score(syn, with_syn, cfg) == doctest::Approx(0.6));
    cfg.include_synthetic_in_score = true;
    CHECK(assemble_score(syn, with_syn, cfg) == doctest::Approx(16.0 / 25.0));
  }

  TEST_CASE("rank prediction") {
    const std::vector<double> perf = {0.9, 0.5, 0.7};
    CHECK(predict_rank(0.95, perf) == 1);
    CHECK(predict_rank(0.1, perf) == 4);
    CHECK(predict_rank(0.6, perf) == 3);
    // Ties do not push the target down.
    CHECK(predict_rank(0.7, perf) == 2);
  }

  TEST_CASE("full selection reproduces the true score exactly") {
    std::mt19937_64 rng(8);
    const auto store = store_of({oracle::random_matrix(rng, 6, 25, false),
                                 oracle::random_matrix(rng, 6, 30, true)},
                                MetricKind::kContinuous);
    const Split split{{"m0", "m1", "m2", "m3", "m4"}, {"m5"}};
    std::map<std::string, SelectionState> sel;
    sel["t0"] = hand_selection(store, "t0", range(0, 25), 5, {"m0", "m1"});
    sel["t1"] = hand_selection(store, "t1", range(0, 30), 5, {"m0", "m1"});
    const auto reports = predict_all(store, split, sel, PredictorConfig{});
    for (std::size_t t = 0; t < 2; ++t) {
      const auto& m = store.matrices()[t];
      CHECK(reports[t].p_hat == doctest::Approx(m.values.row(5).mean()).epsilon(1e-12));
      CHECK(reports[t].instances.empty());
    }
  }

  TEST_CASE("perfect per-instance predictions reproduce the true score") {
    // The target copies m0, and m0 is the only similar model.
    std::mt19937_64 rng(9);
    Eigen::MatrixXd v = oracle::random_matrix(rng, 5, 40, false);
    v.row(4) = v.row(0);
    const auto store = store_of({v}, MetricKind::kContinuous);
    const Split split{{"m0", "m1", "m2", "m3"}, {"m4"}};
    std::map<std::string, SelectionState> sel;
    sel["t0"] = hand_selection(store, "t0", range(0, 20), 4, {"m0"});
    PredictorConfig cfg;
    cfg.tau2 = 1.0;  // user branch for all
    cfg.tau1 = 1e300;
    const auto r = predict_all(store, split, sel, cfg);
    CHECK(r[0].p_hat == doctest::Approx(v.row(4).mean()).epsilon(1e-12));
  }

  TEST_CASE("an isolated task makes OT a no-op") {
    std::mt19937_64 rng(10);
    Eigen::MatrixXd a = oracle::random_matrix(rng, 6, 30, false);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 30);
    a.topRows(3) *= 0.05;
    b.topRows(3).setOnes();
    const auto store = store_of({a, b}, MetricKind::kContinuous);
    const Split split{{"m0", "m1", "m2", "m3", "m4"}, {"m5"}};
    std::map<std::string, SelectionState> sel;
    sel["t0"] = hand_selection(store, "t0", range(0, 10), 5, {"m3", "m4"});
    sel["t1"] = hand_selection(store, "t1", range(0, 10), 5, {"m3", "m4"});
    PredictorConfig on;
    PredictorConfig off;
    off.use_ot = false;
    const auto ctx = PredictionContext(store, split);
    const auto r_on = predict_task(ctx, 0, sel, on);
    const auto r_off = predict_task(ctx, 0, sel, off);
    CHECK(r_on.source_task_ids.empty());
    CHECK(r_on.p_hat == r_off.p_hat);
    CHECK(r_on.counts.n_synthetic == 0);
  }

  TEST_CASE("identical tasks: synthetic columns shrink the error") {
    // With filtering off, exact transport copies the twin columns and the
    // nearest-neighbour step recovers the target; the entropic default blurs
    // them and only improves on average.
    std::mt19937_64 rng(11);
    double sum_default = 0.0;
    double sum_off = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::MatrixXd a = oracle::random_matrix(rng, 8, 30, false);
      const auto store = store_of({a, a}, MetricKind::kContinuous);
      const Split split{{"m0", "m1", "m2", "m3", "m4", "m5", "m6"}, {"m7"}};
      std::map<std::string, SelectionState> sel;
      sel["t0"] = hand_selection(store, "t0", range(0, 10), 7, {"m0", "m1", "m2"});
      sel["t1"] = hand_selection(store, "t1", range(10, 30), 7, {"m0", "m1", "m2"});
      PredictorConfig on;
      on.k_items = 1;
      PredictorConfig exact = on;
      exact.transport.epsilon_scale = 0.0;
      exact.tau1 = 1e300;
      // Copies score 1 up to an ulp; the minimum quantile keeps the median of
      // those near-ties from splitting them across branches.
      exact.quantile_q = 0.0;
      PredictorConfig off = on;
      off.use_ot = false;
      const PredictionContext ctx(store, split);
      int synthesized = 0;
      const auto r_on = predict_task(ctx, 0, sel, on, [&](const SyntheticBlock& b) {
        synthesized = static_cast<int>(b.values_initial.cols());
      });
      const auto r_exact = predict_task(ctx, 0, sel, exact);
      const auto r_off = predict_task(ctx, 0, sel, off);
      CHECK(synthesized == 20);
      CHECK(r_on.source_task_ids == std::vector<std::string>{"t1"});
      const double truth = a.row(7).mean();
      CHECK(r_exact.counts.n_item_cf == 20);
      CHECK(r_exact.p_hat == doctest::Approx(truth).epsilon(1e-12));
      sum_default += std::abs(r_on.p_hat - truth);
      sum_off += std::abs(r_off.p_hat - truth);
    }
    CHECK(sum_default < sum_off);
  }

  TEST_CASE("bucket counts partition the unselected instances") {
    GeneratorSpec spec;
    spec.n_models = 14;
    spec.n_tasks = 6;
    spec.n_task_groups = 2;
    spec.n_families = 3;
    spec.instances_per_task = 60;
    spec.seed = 21;
    const auto store = generate(spec);
    const auto split = split_by_release(store, 0.75);
    const PredictionContext ctx(store, split);
    for (const auto& target : split.test_model_ids) {
      RecordedOracle o(target_results_from_store(store, target));
      std::map<std::string, SelectionState> sel;
      SelectorConfig scfg;
      for (std::size_t t = 0; t < store.num_tasks(); ++t) {
        const auto& m = ctx.initial_matrix(t);
        sel[m.task_id] = select_for_target(m, o, scfg);
      }
      for (const auto& r : predict_all(ctx, sel, PredictorConfig{})) {
        REQUIRE_FALSE(r.error.has_value());
        CHECK(r.counts.n_filtered_by_tau1 + r.counts.n_item_cf + r.counts.n_user_cf ==
              r.counts.n_unselected);
        CHECK(r.instances.size() == r.counts.n_unselected);
        CHECK(r.p_hat >= 0.0);
        CHECK(r.p_hat <= 1.0);
        CHECK(r.rank_hat >= 1);
        CHECK(r.rank_hat <= split.initial_model_ids.size() + 1);
      }
    }
  }

  TEST_CASE("end-to-end report matches the golden file") {
    GeneratorSpec spec;
    spec.n_models = 12;
    spec.n_tasks = 4;
    spec.n_task_groups = 2;
    spec.n_families = 2;
    spec.instances_per_task = 50;
    spec.instances_jitter = 10;
    spec.seed = 5;
    const auto store = generate(spec);
    const auto split = split_by_release(store, 0.75);
    const auto& target = split.test_model_ids.front();
    const PredictionContext ctx(store, split);
    RecordedOracle o(target_results_from_store(store, target));
    std::map<std::string, SelectionState> sel;
    for (std::size_t t = 0; t < store.num_tasks(); ++t) {
      const auto& m = ctx.initial_matrix(t);
      sel[m.task_id] = select_for_target(m, o, SelectorConfig{});
    }
    const auto reports = predict_all(ctx, sel, PredictorConfig{});
    const auto text = predictions_to_json(target, reports).dump(2) + "\n";
    const std::filesystem::path golden =
        std::filesystem::path(CFEVAL_SOURCE_DIR) / "tests" / "golden" / "predict_report.json";
    if (std::getenv("CFEVAL_UPDATE_GOLDEN")) {
      std::filesystem::create_directories(golden.parent_path());
      std::ofstream(golden, std::ios::binary) << text;
    }
    REQUIRE(std::filesystem::exists(golden));
    CHECK(text == read_all(golden));
  }
}
