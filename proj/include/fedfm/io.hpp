#pragma once

#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fedfm::io {

// Shortest round-trippable text form of a double ("%.17g").
std::string format_real(double value);

// Parses a value produced by format_real; throws FormatError on junk.
double parse_real(std::string_view text);
long long parse_int(std::string_view text);

// Space-separated id list for a single CSV field.
std::string join_ids(std::span<const int> ids);
std::vector<int> split_ids(std::string_view field);

std::vector<std::string> split(std::string_view line, char sep);

// Opens for writing (creating parent directories); throws IoError naming the path.
std::ofstream open_output(const std::filesystem::path& path);
std::ifstream open_input(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);

}  // namespace fedfm::io
