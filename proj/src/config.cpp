#include "airm/config.hpp"

#include <fstream>
#include <sstream>

#include "airm/common.hpp"

namespace airm::config {

namespace {
std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}
}  // namespace

Config Config::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

Config Config::from_string(const std::string& text) {
    Config c;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ParamError("config line " + std::to_string(lineno) +
                             " is not key = value: " + t);
        c.kv_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return c;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get(const std::string& key, const std::string& dflt) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? dflt : it->second;
}

int64_t Config::geti(const std::string& key, int64_t dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
        return std::stoll(it->second);
    } catch (...) {
        throw ParamError("config key '" + key + "' is not an integer: " +
                         it->second);
    }
}

double Config::getd(const std::string& key, double dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw ParamError("config key '" + key + "' is not a number: " +
                         it->second);
    }
}

bool Config::getb(const std::string& key, bool dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ParamError("config key '" + key + "' is not a boolean: " + v);
}

std::vector<double> Config::get_list(const std::string& key,
                                     const std::vector<double>& dflt) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return dflt;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (tok.empty()) continue;
        try {
            out.push_back(std::stod(tok));
        } catch (...) {
            throw ParamError("config key '" + key + "' has a bad list entry: " +
                             tok);
        }
    }
    return out;
}

void Config::set(const std::string& key, const std::string& value) {
    kv_[key] = value;
}

void Config::seti(const std::string& key, int64_t value) {
    kv_[key] = std::to_string(value);
}

void Config::setd(const std::string& key, double value) {
    std::ostringstream os;
    os.precision(17);
    os << value;
    kv_[key] = os.str();
}

void Config::setb(const std::string& key, bool value) {
    kv_[key] = value ? "true" : "false";
}

void Config::set_list(const std::string& key, const std::vector<double>& values) {
    std::ostringstream os;
    os.precision(17);
    for (size_t i = 0; i < values.size(); ++i) {
        if (i) os << ",";
        os << values[i];
    }
    kv_[key] = os.str();
}

std::string Config::to_text() const {
    std::ostringstream os;
    for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
    return os.str();
}

void Config::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config file " + path);
    out << to_text();
}

std::string Config::hash() const {
    const std::string text = to_text();
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)h);
    return buf;
}

}  // namespace airm::config
