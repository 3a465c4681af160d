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

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cfeval::csv {

using Row = std::vector<std::string>;

// RFC 4180 style: comma separated, double-quoted fields may contain commas,
// quotes ("") and newlines. Blank lines are skipped.
std::vector<Row> read_file(const std::filesystem::path& path);
std::vector<Row> parse(std::string_view text, std::string_view source);

void write_row(std::ostream& out, const Row& row);
std::string quote(std::string_view field);

// Throws DataError mentioning `context` when text is not a finite number.
double parse_double(std::string_view text, std::string_view context);
long long parse_integer(std::string_view text, std::string_view context);

}  // namespace cfeval::csv
