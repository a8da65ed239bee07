#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tdcn {

// `key = value` lines, UTF-8, '#' comments, blank lines allowed. Returns
// pairs in file order with their line numbers; malformed lines throw
// UsageError naming the line.
std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path, std::vector<int>* line_numbers = nullptr);

} // namespace tdcn
