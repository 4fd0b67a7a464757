#pragma once

// Device scaling and clock comparisons over the device / competitor tables.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "imagine/errors.hpp"

#ifndef IMAGINE_DEFAULT_DB
#define IMAGINE_DEFAULT_DB "data/imagine_db.json"
#endif

namespace imagine::perf {

// 64512 PEs on 2016 BRAMs: two 16-PE blocks per BRAM.
inline constexpr std::uint64_t kPesPerBram = 32;

inline constexpr double kImagineClockMhz = 737.0;

struct DeviceEntry {
    std::string id;
    std::string part;
    std::string family;
    std::uint64_t bram_count = 0;
    double lut_to_bram_ratio = 0;
    double bram_fmax_mhz = 0;
};

struct CompetitorEntry {
    std::string name;
    double f_sys_mhz = 0;
    double bram_fmax_mhz = 0;
    std::string source;
    bool claim_basis = false;
};

struct PimDesignEntry {
    std::string name;
    std::string type;
    std::string device;
    double f_bram_mhz = 0;
    double f_pim_mhz = 0;
    std::optional<double> f_sys_mhz;
};

struct Database {
    std::vector<DeviceEntry> devices;
    std::vector<CompetitorEntry> competitors;
    std::vector<PimDesignEntry> pim_designs;
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) throw format_error(where + ": missing '" + key + "'");
    return j.at(key);
}

inline double number(const nlohmann::json& j, const char* key, const std::string& where) {
    const auto& v = field(j, key, where);
    if (!v.is_number()) throw format_error(where + ": '" + key + "' must be a number");
    return v.get<double>();
}

inline std::string text(const nlohmann::json& j, const char* key, const std::string& where) {
    const auto& v = field(j, key, where);
    if (!v.is_string()) throw format_error(where + ": '" + key + "' must be a string");
    return v.get<std::string>();
}

inline const nlohmann::json& array(const nlohmann::json& j, const char* key) {
    const auto& v = field(j, key, "database");
    if (!v.is_array()) throw format_error(std::string("database: '") + key + "' must be an array");
    return v;
}

} // namespace detail

inline Database database_from_json(const nlohmann::json& j) {
    using namespace detail;
    Database db;
    for (const auto& e : array(j, "devices")) {
        const std::string where = "device " + std::to_string(db.devices.size());
        DeviceEntry d;
        d.id = text(e, "id", where);
        d.part = text(e, "part", where);
        d.family = text(e, "family", where);
        const double brams = number(e, "bram_count", where);
        if (!(brams > 0) || brams != std::floor(brams))
            throw format_error(where + ": bram_count must be a positive integer");
        d.bram_count = static_cast<std::uint64_t>(brams);
        d.lut_to_bram_ratio = number(e, "lut_to_bram_ratio", where);
        d.bram_fmax_mhz = number(e, "bram_fmax_mhz", where);
        if (!(d.bram_fmax_mhz > 0)) throw format_error(where + ": bram_fmax_mhz must be > 0");
        db.devices.push_back(std::move(d));
    }
    for (const auto& e : array(j, "competitors")) {
        const std::string where = "competitor " + std::to_string(db.competitors.size());
        CompetitorEntry c;
        c.name = text(e, "name", where);
        c.f_sys_mhz = number(e, "f_sys_mhz", where);
        c.bram_fmax_mhz = number(e, "bram_fmax_mhz", where);
        c.source = text(e, "source", where);
        if (e.contains("claim_basis")) c.claim_basis = e.at("claim_basis").get<bool>();
        if (!(c.f_sys_mhz > 0) || c.f_sys_mhz > c.bram_fmax_mhz)
            throw format_error(where + ": need 0 < f_sys_mhz <= bram_fmax_mhz");
        db.competitors.push_back(std::move(c));
    }
    if (j.contains("pim_designs")) {
        for (const auto& e : array(j, "pim_designs")) {
            const std::string where = "pim design " + std::to_string(db.pim_designs.size());
            PimDesignEntry p;
            p.name = text(e, "name", where);
            p.type = text(e, "type", where);
            p.device = text(e, "device", where);
            p.f_bram_mhz = number(e, "f_bram_mhz", where);
            p.f_pim_mhz = number(e, "f_pim_mhz", where);
            if (e.contains("f_sys_mhz") && !e.at("f_sys_mhz").is_null()) p.f_sys_mhz = number(e, "f_sys_mhz", where);
            db.pim_designs.push_back(std::move(p));
        }
    }
    return db;
}

inline std::string default_db_path() {
    if (const char* env = std::getenv("IMAGINE_DB"); env && *env) return env;
    return IMAGINE_DEFAULT_DB;
}

inline Database load_database(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open database '" + path + "'");
    try {
        return database_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw format_error("database '" + path + "': " + e.what());
    }
}

inline std::uint64_t max_pe(std::uint64_t bram_count) { return kPesPerBram * bram_count; }

inline std::string format_k(std::uint64_t n) { return std::to_string(n / 1000) + "K"; }

inline double relative_freq(double f_sys_mhz, double f_bram_mhz) {
    if (!(f_sys_mhz > 0) || !(f_bram_mhz > 0)) throw range_error("relative_freq: frequencies must be > 0");
    return 100.0 * f_sys_mhz / f_bram_mhz;
}

inline double round_to(double x, int decimals) {
    const double s = std::pow(10.0, decimals);
    return std::round(x * s) / s;
}

inline std::pair<double, double> clock_speedup_range(double f_mhz, const std::vector<double>& f_competitors) {
    if (f_competitors.empty()) throw range_error("clock_speedup_range: empty competitor list");
    double lo = f_mhz / f_competitors.front(), hi = lo;
    for (double f : f_competitors) {
        lo = std::min(lo, f_mhz / f);
        hi = std::max(hi, f_mhz / f);
    }
    return {lo, hi};
}

inline double exec_time(std::uint64_t cycles, double f_mhz) {
    if (!(f_mhz > 0)) throw range_error("exec_time: frequency must be > 0");
    return static_cast<double>(cycles) / (f_mhz * 1e6);
}

inline double peak_tops(std::uint64_t pe_count, double f_mhz, double mac_cycles) {
    if (!(mac_cycles > 0)) throw range_error("peak_tops: mac_cycles must be > 0");
    return 2.0 * static_cast<double>(pe_count) * f_mhz * 1e6 / mac_cycles / 1e12;
}

// Cycles per MAC that make peak_tops(...) equal `tops`.
inline double implied_mac_cycles(std::uint64_t pe_count, double f_mhz, double tops) {
    return 2.0 * static_cast<double>(pe_count) * f_mhz * 1e6 / (tops * 1e12);
}

// One MULT plus one accumulate ADD (Wacc = 2W) under the microcode costs.
inline std::uint64_t microcode_mac_cycles(unsigned width = 8, unsigned radix = 2, unsigned d_alu = 2) {
    const std::uint64_t passes = radix == 4 ? (width + 1) / 2 : width;
    return (1 + passes * (width + 2) + d_alu) + (1 + 2 * width + d_alu);
}

struct ScalingPoint {
    std::string id;
    std::uint64_t bram_count = 0;
    double tops = 0;
};

inline std::vector<ScalingPoint> ideal_scaling_curve(std::vector<DeviceEntry> devices, double f_mhz,
                                                     double mac_cycles) {
    if (devices.empty()) throw range_error("ideal_scaling_curve: empty device list");
    std::stable_sort(devices.begin(), devices.end(),
                     [](const auto& a, const auto& b) { return a.bram_count < b.bram_count; });
    std::vector<ScalingPoint> out;
    for (const auto& d : devices) out.push_back({d.id, d.bram_count, peak_tops(max_pe(d.bram_count), f_mhz, mac_cycles)});
    return out;
}

} // namespace imagine::perf
