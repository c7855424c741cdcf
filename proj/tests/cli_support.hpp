#pragma once

// Helpers for tests that drive the command-line tool.

#include <json.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

inline fs::path scratch(const std::string &name) {
    const fs::path p = fs::path(SPLATGRASP_SCRATCH) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Runs the tool with `args`; stdout and stderr go to files next to `log`.
inline int run(const std::string &args, const fs::path &log) {
    const std::string cmd = std::string("\"") + SPLATGRASP_CLI + "\" " + args + " > \"" + log.string() + ".out\" 2> \"" +
                            log.string() + ".err\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

inline std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Json load(const fs::path &p) { return Json::parse(slurp(p)); }

// Structural equality with a numeric tolerance; `where` names the first mismatch.
inline bool close(const Json &a, const Json &b, double tol, std::string &where, const std::string &path = "$") {
    if (a.is_number() && b.is_number()) {
        const double x = a.get<double>(), y = b.get<double>();
        if (std::abs(x - y) <= tol * std::max(1.0, std::max(std::abs(x), std::abs(y)))) return true;
        where = path + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    if (a.type() != b.type()) {
        where = path + ": type differs";
        return false;
    }
    if (a.is_array()) {
        if (a.size() != b.size()) {
            where = path + ": length " + std::to_string(a.size()) + " vs " + std::to_string(b.size());
            return false;
        }
        for (std::size_t i = 0; i < a.size(); ++i)
            if (!close(a[i], b[i], tol, where, path + "[" + std::to_string(i) + "]")) return false;
        return true;
    }
    if (a.is_object()) {
        if (a.size() != b.size()) {
            where = path + ": key count differs";
            return false;
        }
        for (auto it = a.begin(); it != a.end(); ++it) {
            if (!b.contains(it.key())) {
                where = path + "." + it.key() + ": missing";
                return false;
            }
            if (!close(it.value(), b[it.key()], tol, where, path + "." + it.key())) return false;
        }
        return true;
    }
    if (a != b) {
        where = path + ": " + a.dump() + " vs " + b.dump();
        return false;
    }
    return true;
}

} // namespace cli
