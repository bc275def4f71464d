#include "vcmesh/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vcmesh/error.hpp"

namespace vcmesh {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    size_t at = 0;
    while (true) {
        size_t next = s.find(sep, at);
        if (next == std::string::npos) {
            parts.push_back(s.substr(at));
            return parts;
        }
        parts.push_back(s.substr(at, next - at));
        at = next + 1;
    }
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw ConfigError("bad value for " + key + ": '" + value + "'");
}

long long to_int(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    long long out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, value);
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) bad_value(key, value);
        return out;
    } catch (const std::exception&) {
        bad_value(key, value);
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    std::string v = trim(value);
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, value);
}

// Accepts comma- or whitespace-separated integers.
std::vector<int> to_int_list(const std::string& key, const std::string& value) {
    std::string v = value;
    std::replace(v.begin(), v.end(), ',', ' ');
    std::vector<int> out;
    std::stringstream ss(v);
    std::string p;
    while (ss >> p) out.push_back(static_cast<int>(to_int(key, p)));
    if (out.empty()) bad_value(key, value);
    return out;
}

bool wildcard_match(const std::string& pattern, const std::string& text) {
    size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace

LevelSpec parse_level_spec(const std::string& text) {
    std::vector<std::string> parts = split(trim(text), ':');
    if (parts.size() < 2 || parts.size() > 3)
        throw ConfigError("level spec must be s:r or s:r:p1,p2,... , got '" + text + "'");
    LevelSpec spec;
    spec.stride = static_cast<int>(to_int("level stride", parts[0]));
    spec.radius = static_cast<int>(to_int("level radius", parts[1]));
    if (spec.stride < 1) throw ConfigError("level stride must be >= 1 in '" + text + "'");
    if (spec.radius < 0) throw ConfigError("level radius must be >= 0 in '" + text + "'");
    if (parts.size() == 3 && !trim(parts[2]).empty())
        spec.pinned = to_int_list("pinned vertices", parts[2]);
    return spec;
}

std::vector<std::string> expand_glob(const std::string& pattern) {
    namespace fs = std::filesystem;
    std::string dir_part = ".";
    std::string name_part = pattern;
    size_t slash = pattern.find_last_of('/');
    if (slash != std::string::npos) {
        dir_part = pattern.substr(0, slash);
        if (dir_part.empty()) dir_part = "/";
        name_part = pattern.substr(slash + 1);
    }
    if (dir_part.find('*') != std::string::npos)
        throw ConfigError("wildcards are only supported in the final path component: " + pattern);
    if (name_part.find('*') == std::string::npos) {
        if (!fs::exists(pattern)) throw InputError("no such file: " + pattern);
        return {pattern};
    }
    if (!fs::is_directory(dir_part)) throw InputError("no such directory: " + dir_part);
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(dir_part)) {
        std::string name = entry.path().filename().string();
        if (wildcard_match(name_part, name)) out.push_back((fs::path(dir_part) / name).string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config " + path);
    RunConfig cfg;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError(path + ":" + std::to_string(line_no) + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section != "data" && section != "hierarchy" && section != "model" &&
                section != "train" && section != "output")
                throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(s.substr(0, eq));
        std::string value = trim(s.substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;

        if (full == "data.dataset") {
            cfg.dataset_glob = value;
        } else if (full == "data.template") {
            cfg.template_mesh = value;
        } else if (full == "data.val_fraction") {
            cfg.val_fraction = to_double(full, value);
        } else if (full == "data.test_fraction") {
            cfg.test_fraction = to_double(full, value);
        } else if (full == "hierarchy.levels") {
            cfg.levels.clear();
            for (const std::string& part : split(value, ' ')) {
                std::string p = trim(part);
                if (!p.empty()) cfg.levels.push_back(parse_level_spec(p));
            }
            if (cfg.levels.empty())
                throw ConfigError(path + ":" + std::to_string(line_no) + ": empty level list");
        } else if (full == "hierarchy.seed") {
            cfg.hierarchy_seed = static_cast<uint64_t>(to_int(full, value));
        } else if (full == "model.channels") {
            cfg.channels = to_int_list(full, value);
        } else if (full == "model.m") {
            std::string v = trim(value);
            std::string lower = v;
            std::transform(lower.begin(), lower.end(), lower.begin(),
                           [](unsigned char c) { return std::tolower(c); });
            if (lower == "auto")
                cfg.m_plan.clear();
            else
                cfg.m_plan = to_int_list(full, value);
        } else if (full == "model.residual") {
            cfg.use_residual = to_bool(full, value);
        } else if (full == "model.normalize_basis") {
            cfg.normalize_basis = to_bool(full, value);
        } else if (full == "train.batch_size") {
            cfg.train.batch_size = static_cast<int>(to_int(full, value));
        } else if (full == "train.lr") {
            cfg.train.lr = to_double(full, value);
        } else if (full == "train.decay") {
            cfg.train.decay = to_double(full, value);
        } else if (full == "train.epochs") {
            cfg.train.epochs = static_cast<int>(to_int(full, value));
        } else if (full == "train.l1_weight") {
            cfg.train.l1_weight = to_double(full, value);
        } else if (full == "train.laplacian_weight") {
            cfg.train.laplacian_weight = to_double(full, value);
        } else if (full == "train.seed") {
            cfg.train.seed = static_cast<uint64_t>(to_int(full, value));
        } else if (full == "train.checkpoint_every") {
            cfg.train.checkpoint_every = static_cast<int>(to_int(full, value));
        } else if (full == "train.resume") {
            cfg.resume = value;
        } else if (full == "output.dir") {
            cfg.out_dir = value;
        } else {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": unknown key '" + full + "'");
        }
    }
    if (cfg.val_fraction < 0 || cfg.test_fraction < 0 ||
        cfg.val_fraction + cfg.test_fraction >= 1.0)
        throw ConfigError("split fractions must be nonnegative and sum below 1");
    return cfg;
}

}  // namespace vcmesh
