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

#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "cfeval/generator.hpp"
#include "cfeval/store.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace cfeval;

namespace {

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

// Two tasks over four models; `bad` overrides one cell of task b.
fs::path write_csv_store(const std::string& name, const std::string& bad = "0.25",
                         const std::string& kind_b = "continuous") {
  auto dir = oracle::scratch_dir(name);
  write_file(dir / "roster.csv",
             "model_id,release_index,display_name\n"
             "m0,0,zero\nm1,1,one\nm2,2,two\nm3,3,three\n");
  write_file(dir / "tasks.csv", "task_id,metric_kind\na,binary\nb," + kind_b + "\n");
  write_file(dir / "task_a.csv",
             "model_id,a0,a1,a2\nm0,1,0,1\nm1,0,0,1\nm2,1,1,1\nm3,0,1,0\n");
  write_file(dir / "task_b.csv",
             "model_id,b0,b1\nm0,0.5," + bad + "\nm1,0.125,1\nm2,0,0.75\nm3,1,0\n");
  return dir;
}

std::string error_of(const fs::path& dir) {
  try {
    load_store(dir, StoreFormat::kCsvDir);
  } catch (const DataError& e) {
    return e.what();
  }
  return {};
}

BenchmarkStore small_generated(std::uint64_t seed = 3) {
  GeneratorSpec spec;
  spec.n_models = 9;
  spec.n_tasks = 3;
  spec.instances_per_task = 12;
  spec.instances_jitter = 4;
  spec.metric = MetricKind::kContinuous;
  spec.seed = seed;
  return generate(spec);
}

}  // namespace

TEST_SUITE("store") {
  TEST_CASE("csv directory with two tasks and four models loads") {
    const auto store = load_store(write_csv_store("load_ok"), StoreFormat::kCsvDir);
    CHECK(store.num_tasks() == 2);
    CHECK(store.num_models() == 4);
    CHECK(store.task("a").metric_kind == MetricKind::kBinary);
    CHECK(store.matrix("b").values(1, 0) == doctest::Approx(0.125));
    CHECK(store.matrix("a").instance_ids == std::vector<std::string>{"a0", "a1", "a2"});
  }

  TEST_CASE("out-of-range value names task, row and column") {
    const auto msg = error_of(write_csv_store("range", "1.3"));
    CHECK(msg.find("value out of range [0,1]") != std::string::npos);
    CHECK(msg.find("'b'") != std::string::npos);
    CHECK(msg.find("'m0'") != std::string::npos);
    CHECK(msg.find("'b1'") != std::string::npos);
  }

  TEST_CASE("fractional value in a binary task is rejected") {
    const auto msg = error_of(write_csv_store("binary", "0.5", "binary"));
    CHECK(msg.find("non-binary value in binary task") != std::string::npos);
  }

  TEST_CASE("duplicate ids and ragged rows are rejected") {
    auto dir = write_csv_store("dup_model");
    write_file(dir / "roster.csv", "model_id,release_index,display_name\nm0,0,a\nm0,1,b\n");
    CHECK(error_of(dir).find("duplicate model id") != std::string::npos);

    dir = write_csv_store("dup_instance");
    write_file(dir / "task_a.csv", "model_id,a0,a0,a2\nm0,1,0,1\nm1,0,0,1\nm2,1,1,1\nm3,0,1,0\n");
    CHECK(error_of(dir).find("duplicate") != std::string::npos);

    dir = write_csv_store("ragged");
    write_file(dir / "task_a.csv", "model_id,a0,a1,a2\nm0,1,0\nm1,0,0,1\nm2,1,1,1\nm3,0,1,0\n");
    CHECK(error_of(dir).find("dimension mismatch") != std::string::npos);

    dir = write_csv_store("missing_row");
    write_file(dir / "task_a.csv", "model_id,a0,a1,a2\nm0,1,0,1\nm1,0,0,1\nm2,1,1,1\n");
    CHECK(error_of(dir).find("missing entries") != std::string::npos);
  }

  TEST_CASE("release ties break by model id and are renumbered") {
    std::vector<ModelRecord> models = {{"zeta", 5, ""}, {"alpha", 5, ""}, {"mid", 2, ""}};
    std::vector<TaskRecord> tasks = {{"t", {"i0"}, MetricKind::kContinuous}};
    EvalMatrix m{"t", {"zeta", "alpha", "mid"}, {"i0"}, Eigen::MatrixXd(3, 1)};
    m.values << 0.1, 0.2, 0.3;
    const auto store = BenchmarkStore::create(models, tasks, {m});
    REQUIRE(store.models().size() == 3);
    CHECK(store.models()[0].model_id == "mid");
    CHECK(store.models()[1].model_id == "alpha");
    CHECK(store.models()[2].model_id == "zeta");
    for (std::size_t i = 0; i < 3; ++i) CHECK(store.models()[i].release_index == std::int64_t(i));
    // Rows follow the roster.
    CHECK(store.matrix("t").values(0, 0) == 0.3);
    CHECK(store.matrix("t").values(1, 0) == 0.2);
  }

  TEST_CASE("save then load is field-for-field identical in both formats") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto store = small_generated(seed);
      const auto dir = oracle::scratch_dir("roundtrip_csv_" + std::to_string(seed));
      save_store(store, dir, StoreFormat::kCsvDir);
      CHECK(load_store(dir) == store);
      const auto json = oracle::scratch_dir("roundtrip_json_" + std::to_string(seed)) / "s.json";
      save_store(store, json, StoreFormat::kJson);
      CHECK(detect_store_format(json) == StoreFormat::kJson);
      CHECK(load_store(json) == store);
    }
  }

  TEST_CASE("numbers survive text serialization bit-exactly") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
      const double v = u(rng);
      const auto text = format_number(v);
      CHECK(std::stod(text) == v);
    }
    CHECK(format_number(0.5) == "0.5");
    CHECK(format_number(1.0) == "1");
  }

  TEST_CASE("split sizes follow rounding and clamping") {
    auto roster = [](std::size_t n) {
      std::vector<ModelRecord> models;
      EvalMatrix m{"t", {}, {"i"}, Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1)};
      for (std::size_t i = 0; i < n; ++i) {
        models.push_back({"m" + std::to_string(1000 + i), static_cast<std::int64_t>(i), ""});
        m.model_ids.push_back(models.back().model_id);
      }
      return BenchmarkStore::create(models, {{"t", {"i"}, MetricKind::kContinuous}}, {m});
    };
    CHECK(split_by_release(roster(395), 0.75).initial_model_ids.size() == 296);
    CHECK(split_by_release(roster(395), 0.75).test_model_ids.size() == 99);
    CHECK(split_by_release(roster(4), 0.75).initial_model_ids.size() == 3);
    CHECK(split_by_release(roster(2), 0.99).initial_model_ids.size() == 1);
    CHECK(split_by_release(roster(2), 0.01).initial_model_ids.size() == 1);
    // 0.5 * 5 = 2.5 rounds away from zero.
    CHECK(split_by_release(roster(5), 0.5).initial_model_ids.size() == 3);
    CHECK_THROWS_AS(split_by_release(roster(1), 0.5), ArgumentError);
  }

  TEST_CASE("splits are deterministic and release-ordered") {
    const auto store = small_generated();
    for (double f : {0.2, 0.5, 0.75, 0.9}) {
      const auto a = split_by_release(store, f);
      CHECK(a == split_by_release(store, f));
      std::int64_t max_initial = -1;
      std::int64_t min_test = std::numeric_limits<std::int64_t>::max();
      for (const auto& id : a.initial_model_ids) {
        max_initial = std::max(max_initial, store.models()[store.model_index(id)].release_index);
      }
      for (const auto& id : a.test_model_ids) {
        min_test = std::min(min_test, store.models()[store.model_index(id)].release_index);
      }
      CHECK(max_initial < min_test);
      CHECK_NOTHROW(validate_split(store, a));
    }
  }

  TEST_CASE("split validation rejects overlap and release inversions") {
    const auto store = small_generated();
    auto s = split_by_release(store, 0.5);
    auto overlap = s;
    overlap.test_model_ids.push_back(overlap.initial_model_ids.front());
    CHECK_THROWS_AS(validate_split(store, overlap), DataError);
    Split inverted{s.test_model_ids, s.initial_model_ids};
    CHECK_THROWS_AS(validate_split(store, inverted), DataError);
    const auto path = oracle::scratch_dir("split_io") / "split.json";
    save_split(s, path);
    CHECK(load_split(path) == s);
  }

  TEST_CASE("submatrix copies the requested rows and columns in order") {
    const auto store = small_generated();
    const auto& full = store.matrix(store.tasks()[0].task_id);
    const auto same =
        task_submatrix(store, full.task_id, full.model_ids, full.instance_ids);
    CHECK(same == full);

    const auto empty = task_submatrix(store, full.task_id, full.model_ids, {});
    CHECK(empty.values.rows() == static_cast<Eigen::Index>(full.model_ids.size()));
    CHECK(empty.values.cols() == 0);

    std::vector<std::string> reversed(full.model_ids.rbegin(), full.model_ids.rend());
    const auto rev = task_submatrix(store, full.task_id, reversed, full.instance_ids);
    const auto n = full.values.rows();
    for (Eigen::Index r = 0; r < n; ++r) CHECK(rev.values.row(r) == full.values.row(n - 1 - r));

    const std::vector<std::string> unknown = {"nope"};
    CHECK_THROWS_AS(task_submatrix(store, full.task_id, unknown, full.instance_ids), DataError);
    CHECK_THROWS_AS(task_submatrix(store, "missing", full.model_ids, full.instance_ids),
                    DataError);
  }

  TEST_CASE("target results replay one store row") {
    const auto store = small_generated();
    const auto& id = store.models().back().model_id;
    const auto results = target_results_from_store(store, id);
    const auto dir = oracle::scratch_dir("target_results");
    save_target_results(results, dir);
    const auto back = load_target_results(dir);
    CHECK(back.model_id == id);
    CHECK(back.values == results.values);
    const auto& t = store.tasks()[1];
    const auto row = static_cast<Eigen::Index>(store.model_index(id));
    CHECK(back.values.at(t.task_id).at(t.instance_ids[2]) == store.matrix(t.task_id).values(row, 2));
  }
}
