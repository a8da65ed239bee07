#include "tdcn/config.hpp"

#include <fstream>

#include "tdcn/errors.hpp"

namespace tdcn {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

std::vector<std::pair<std::string, std::string>> parse_config_file(
    const std::string& path, std::vector<int>* line_numbers) {
    std::ifstream f(path);
    if (!f) throw UsageError("config: cannot open " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::string t = trim(line);
        if (t.empty()) continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                             ": expected 'key = value', got '" + t + "'");
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw UsageError("config: " + path + ":" + std::to_string(lineno) +
                             ": empty key");
        out.emplace_back(key, value);
        if (line_numbers) line_numbers->push_back(lineno);
    }
    return out;
}

} // namespace tdcn
