#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sresdmd::csv {

// Shortest-round-trip is not what we want for diffable files; every value is
// written with 17 significant digits so reloads are bit-exact.
std::string format(double v);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

// Parses a full field as a double; returns false on trailing garbage.
bool parse_double(std::string_view field, double& out);
bool parse_long(std::string_view field, long& out);

}  // namespace sresdmd::csv
