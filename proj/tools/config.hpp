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

// Flat configuration document for the command-line tool.
//
//   # comment
//   selector.n_similar = 5
//   predictor.use_ot = true
//
// Precedence: built-in defaults < config file < --set key=value < dedicated
// flags. Unknown keys are errors.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cfeval/generator.hpp"
#include "cfeval/harness.hpp"

namespace cfeval::cli {

struct RunConfig {
  ExperimentConfig experiment;
  GeneratorSpec generator;
  double initial_fraction = 0.75;
  std::uint64_t seed = 0;
  std::string store_path;
  std::string split_path;
  std::string out_dir;
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

std::vector<ConfigKey> config_keys();

// Throws ArgumentError on unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value);
std::string get_config_value(const RunConfig& cfg, std::string_view key);

void apply_config_text(RunConfig& cfg, std::string_view text, std::string_view source);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

// Every key with its doc line, in the file format above.
std::string dump_config(const RunConfig& cfg);

}  // namespace cfeval::cli
