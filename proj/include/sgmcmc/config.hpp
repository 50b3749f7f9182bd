#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sgmcmc/common.hpp"

namespace sgmcmc {

// Flat key=value configuration with [section] headers. Keys are stored as
// "section.key"; values stay strings until typed access. Unknown keys are
// rejected against the experiment's registry so configs cannot silently rot.
class ConfigMap {
  public:
    ConfigMap() = default;

    static ConfigMap parse_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw config_error("config file not found: " + path);
        return parse_stream(in, path);
    }

    static ConfigMap parse_stream(std::istream& in, const std::string& name = "<stream>") {
        ConfigMap cfg;
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            std::string s = strip(line);
            if (s.empty() || s[0] == '#') continue;
            if (s.front() == '[') {
                if (s.back() != ']')
                    throw parse_error(name + ": bad section header at line " +
                                      std::to_string(line_no));
                section = strip(s.substr(1, s.size() - 2));
                if (section.empty())
                    throw parse_error(name + ": empty section name at line " +
                                      std::to_string(line_no));
                continue;
            }
            std::size_t eq = s.find('=');
            if (eq == std::string::npos)
                throw parse_error(name + ": expected key = value at line " +
                                  std::to_string(line_no));
            std::string key = strip(s.substr(0, eq));
            std::string value = strip(s.substr(eq + 1));
            if (key.empty())
                throw parse_error(name + ": empty key at line " + std::to_string(line_no));
            cfg.values_[section.empty() ? key : section + "." + key] = value;
        }
        return cfg;
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            double v = std::stod(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("config key " + key + ": expected a number, got '" + it->second +
                               "'");
        }
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            std::size_t pos = 0;
            long long v = std::stoll(it->second, &pos);
            if (pos != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw config_error("config key " + key + ": expected an integer, got '" + it->second +
                               "'");
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw config_error("config key " + key + ": expected true/false, got '" + it->second +
                           "'");
    }

    std::vector<std::string> get_list(const std::string& key,
                                      const std::vector<std::string>& fallback) const {
        auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        std::vector<std::string> out;
        std::string item;
        std::istringstream ss(it->second);
        while (std::getline(ss, item, ',')) {
            std::string s = strip(item);
            if (!s.empty()) out.push_back(s);
        }
        return out;
    }

    // Every present key must be known; catches typos before any run starts.
    void require_known(const std::set<std::string>& known) const {
        for (const auto& [key, value] : values_) {
            (void)value;
            if (!known.count(key)) throw config_error("unknown config key: " + key);
        }
    }

    // Deterministic dump for the resolved-config echo.
    std::string echo() const {
        std::string out;
        std::string current_section;
        for (const auto& [key, value] : values_) {
            std::size_t dot = key.rfind('.');
            std::string section = dot == std::string::npos ? "" : key.substr(0, dot);
            std::string name = dot == std::string::npos ? key : key.substr(dot + 1);
            if (section != current_section) {
                out += "[" + section + "]\n";
                current_section = section;
            }
            out += name + " = " + value + "\n";
        }
        return out;
    }

    const std::map<std::string, std::string>& raw() const { return values_; }

  private:
    static std::string strip(const std::string& s) {
        std::size_t a = s.find_first_not_of(" \t\r");
        if (a == std::string::npos) return "";
        std::size_t b = s.find_last_not_of(" \t\r");
        return s.substr(a, b - a + 1);
    }

    std::map<std::string, std::string> values_;
};

}  // namespace sgmcmc
