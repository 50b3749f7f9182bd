#pragma once

#include <chrono>
#include <filesystem>
#include <set>
#include <string>

#include "sgmcmc/config.hpp"
#include "sgmcmc/metric.hpp"
#include "sgmcmc/presets.hpp"

namespace sgmcmc::detail {

inline void ensure_out_dir(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
}

inline void write_echo(const ConfigMap& cfg, const std::string& out_dir) {
    std::ofstream out(std::filesystem::path(out_dir) / "config_resolved.cfg");
    out << cfg.echo();
}

inline double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// preset.<name>.<param> keys are validated against this list
inline const std::set<std::string>& preset_param_names() {
    static const std::set<std::string> names = {
        "epsilon",    "friction",        "diffusion",    "thermostat", "mass",
        "resample_period", "compensation", "schedule_a", "schedule_b", "schedule_c"};
    return names;
}

inline void require_known_with_presets(const ConfigMap& cfg, const std::set<std::string>& fixed,
                                       const std::set<std::string>& preset_names) {
    for (const auto& [key, value] : cfg.raw()) {
        (void)value;
        if (fixed.count(key)) continue;
        if (key.rfind("preset.", 0) == 0) {
            std::size_t second = key.find('.', 7);
            if (second != std::string::npos) {
                std::string name = key.substr(7, second - 7);
                std::string param = key.substr(second + 1);
                if (preset_names.count(name) && preset_param_names().count(param)) continue;
            }
        }
        throw config_error("unknown config key: " + key);
    }
}

inline StepSchedule schedule_from_config(const ConfigMap& cfg, const std::string& prefix,
                                         double default_eps) {
    if (cfg.has(prefix + ".schedule_a") || cfg.has(prefix + ".schedule_b") ||
        cfg.has(prefix + ".schedule_c")) {
        double a = cfg.get_double(prefix + ".schedule_a", 1.0);
        double b = cfg.get_double(prefix + ".schedule_b", 1000.0);
        double c = cfg.get_double(prefix + ".schedule_c", 0.55);
        return StepSchedule::polynomial(a, b, c);
    }
    return StepSchedule::constant(cfg.get_double(prefix + ".epsilon", default_eps));
}

inline MetricSpec level_metric_for(const EnergyModel& target, double scale, double offset) {
    return MetricSpec::potential_level(
        scale, offset, [target](const Vector& t) { return target.potential(t); },
        [target](const Vector& t) { return target.potential_grad(t); });
}

}  // namespace sgmcmc::detail
