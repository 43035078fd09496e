#include "orbm/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace orbm {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
    });
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, sep)) out.push_back(trim(item));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last;
}

}  // namespace

Config Config::parse(const std::string& text, const std::string& origin) {
    Config cfg;
    cfg.origin_ = origin;
    std::string section;
    std::istringstream is(text);
    std::string raw;
    int line = 0;
    auto error = [&](const std::string& what) {
        throw ConfigError(origin + ":" + std::to_string(line) + ": " + what);
    };
    while (std::getline(is, raw)) {
        ++line;
        const auto hash = raw.find('#');
        const std::string s = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') error("unterminated section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!valid_name(section)) error("invalid section name '" + section + "'");
            cfg.data_[section];
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) error("expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        if (!valid_name(key)) error("invalid key '" + key + "'");
        auto& sec = cfg.data_[section];
        if (sec.count(key)) error("duplicate key '" + key + "'");
        sec[key] = Entry{value, line};
    }
    return cfg;
}

Config Config::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open configuration file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    if (s == data_.end()) return nullptr;
    auto k = s->second.find(key);
    if (k == s->second.end()) return nullptr;
    used_.insert({section, key});
    return &k->second;
}

void Config::fail(const std::string& section, const std::string& key, const std::string& what) const {
    std::string where = origin_;
    auto s = data_.find(section);
    if (s != data_.end()) {
        auto k = s->second.find(key);
        if (k != s->second.end()) where += ":" + std::to_string(k->second.line);
    }
    const std::string name = section.empty() ? key : "[" + section + "] " + key;
    throw ConfigError(where + ": " + name + ": " + what);
}

bool Config::has(const std::string& section, const std::string& key) const {
    auto s = data_.find(section);
    return s != data_.end() && s->second.count(key) > 0;
}

bool Config::has_section(const std::string& section) const {
    return data_.count(section) > 0;
}

std::optional<std::string> Config::get_string(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    return e->value;
}

std::optional<double> Config::get_double(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    double v = 0.0;
    if (!parse_double(e->value, v)) fail(section, key, "expected a real number, got '" + e->value + "'");
    return v;
}

std::optional<long> Config::get_long(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    long v = 0;
    auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc() || ptr != e->value.data() + e->value.size()) {
        // Accept integral reals such as 1e4.
        double d = 0.0;
        if (parse_double(e->value, d) && d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long>(d);
        fail(section, key, "expected an integer, got '" + e->value + "'");
    }
    return v;
}

std::optional<std::uint64_t> Config::get_u64(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(e->value.data(), e->value.data() + e->value.size(), v);
    if (ec != std::errc() || ptr != e->value.data() + e->value.size()) {
        fail(section, key, "expected a nonnegative integer, got '" + e->value + "'");
    }
    return v;
}

std::optional<bool> Config::get_bool(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    if (e->value == "true" || e->value == "1" || e->value == "yes") return true;
    if (e->value == "false" || e->value == "0" || e->value == "no") return false;
    fail(section, key, "expected true or false, got '" + e->value + "'");
}

std::optional<std::vector<double>> Config::get_list(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    if (e->value.empty()) return out;
    for (const auto& item : split(e->value, ',')) {
        double v = 0.0;
        if (!parse_double(item, v)) fail(section, key, "expected comma-separated reals, got '" + e->value + "'");
        out.push_back(v);
    }
    return out;
}

std::optional<Vec> Config::get_vector(const std::string& section, const std::string& key) const {
    auto list = get_list(section, key);
    if (!list) return std::nullopt;
    return Eigen::Map<const Vec>(list->data(), static_cast<Eigen::Index>(list->size()));
}

std::optional<Mat> Config::get_matrix(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    std::vector<std::vector<double>> rows;
    for (const auto& row : split(e->value, ';')) {
        std::vector<double> r;
        for (const auto& item : split(row, ',')) {
            double v = 0.0;
            if (!parse_double(item, v)) fail(section, key, "malformed matrix entry '" + item + "'");
            r.push_back(v);
        }
        if (!rows.empty() && r.size() != rows.front().size()) fail(section, key, "matrix rows differ in length");
        rows.push_back(std::move(r));
    }
    if (rows.empty() || rows.front().empty()) fail(section, key, "empty matrix");
    Mat m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
    }
    return m;
}

std::string Config::require_string(const std::string& section, const std::string& key) const {
    auto v = get_string(section, key);
    if (!v) fail(section, key, "required key is missing");
    return *v;
}

double Config::require_double(const std::string& section, const std::string& key) const {
    auto v = get_double(section, key);
    if (!v) fail(section, key, "required key is missing");
    return *v;
}

long Config::require_long(const std::string& section, const std::string& key) const {
    auto v = get_long(section, key);
    if (!v) fail(section, key, "required key is missing");
    return *v;
}

void Config::consume_section(const std::string& section) const {
    auto s = data_.find(section);
    if (s == data_.end()) return;
    for (const auto& [key, entry] : s->second) used_.insert({section, key});
}

void Config::reject_unknown() const {
    std::string msg;
    for (const auto& [section, keys] : data_) {
        for (const auto& [key, entry] : keys) {
            if (used_.count({section, key})) continue;
            if (!msg.empty()) msg += "; ";
            msg += origin_ + ":" + std::to_string(entry.line) + ": unknown key '" +
                   (section.empty() ? key : "[" + section + "] " + key) + "'";
        }
    }
    if (!msg.empty()) throw ConfigError(msg);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
    auto& e = data_[section][key];
    e.value = value;
}

std::string Config::echo() const {
    std::ostringstream os;
    for (const auto& [section, keys] : data_) {
        if (!section.empty()) os << '[' << section << "]\n";
        for (const auto& [key, entry] : keys) os << key << " = " << entry.value << '\n';
    }
    return os.str();
}

}  // namespace orbm
