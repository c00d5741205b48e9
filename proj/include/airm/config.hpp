#pragma once

#include <map>
#include <string>
#include <vector>

namespace airm::config {

// Flat `key = value` text configuration. Lines starting with '#' are
// comments. Writing a Config back out yields the fully-resolved snapshot
// used as the reproducibility audit trail next to every output.
class Config {
public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& dflt) const;
    int64_t geti(const std::string& key, int64_t dflt) const;
    double getd(const std::string& key, double dflt) const;
    bool getb(const std::string& key, bool dflt) const;
    std::vector<double> get_list(const std::string& key,
                                 const std::vector<double>& dflt) const;

    void set(const std::string& key, const std::string& value);
    void seti(const std::string& key, int64_t value);
    void setd(const std::string& key, double value);
    void setb(const std::string& key, bool value);
    void set_list(const std::string& key, const std::vector<double>& values);

    std::string to_text() const;
    void write_file(const std::string& path) const;

    // FNV-1a over the resolved text; used to key experiment caches.
    std::string hash() const;

private:
    std::map<std::string, std::string> kv_;
};

}  // namespace airm::config
