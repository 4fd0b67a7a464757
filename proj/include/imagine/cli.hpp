#pragma once

// Command-line front end. run_cli() parses and dispatches; the cmd_*
// functions are callable directly from tests.
//
// Exit status: 0 success, 1 verification failure (or asm/sim input error),
// 2 usage or configuration error.

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "imagine/assembler.hpp"
#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/kernel.hpp"
#include "imagine/perfmodel.hpp"
#include "imagine/system.hpp"

namespace imagine::cli {

inline constexpr int kOk = 0;
inline constexpr int kFail = 1;
inline constexpr int kUsage = 2;

struct Io {
    std::ostream& out;
    std::ostream& err;
};

struct RunOptions {
    std::string config;
    std::uint64_t seed = kDefaultSeed;
    bool radix4 = false;
    bool slice4 = false;
    std::string trace;
    std::string csv;
    std::string stats;
};

inline SystemConfig make_config(const RunOptions& o) {
    SystemConfig cfg = o.config.empty() ? SystemConfig{} : load_config(o.config);
    if (o.radix4) cfg.radix = 4;
    if (o.slice4) cfg.slice = 4;
    cfg.validate();
    return cfg;
}

inline std::string read_file(const std::string& path, bool binary = false) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    if (!in) throw load_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& data, bool binary = false) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw load_error("cannot write '" + path + "'");
    out << data;
}

inline std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", s);
    return buf;
}

inline std::string fixed(double v, int decimals) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(decimals) << v;
    return os.str();
}

// Source text or an IMG1 binary.
inline isa::Program load_program(const std::string& path) {
    const std::string data = read_file(path, true);
    if (data.size() >= 4 && data.compare(0, 4, "IMG1") == 0) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(data.data());
        return isa::from_binary({p, data.size()});
    }
    return isa::assemble(data);
}

// ---------------------------------------------------------------------------

inline int cmd_asm(const std::string& src, const std::string& output, bool disassemble, Io io) {
    try {
        if (disassemble) {
            const auto prog = load_program(src);
            const auto text = isa::disassemble(prog);
            if (output.empty()) io.out << text;
            else write_file(output, text);
            return kOk;
        }
        const auto prog = isa::assemble(read_file(src));
        const auto bytes = isa::to_binary(prog);
        const std::string dest = output.empty() ? "a.img" : output;
        write_file(dest, std::string(bytes.begin(), bytes.end()), true);
        io.out << src << ": " << prog.size() << " instructions, " << bytes.size() << " bytes -> " << dest << '\n';
        return kOk;
    } catch (const assemble_error& e) {
        io.err << src << ": " << e.what() << '\n';
        return kFail;
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kFail;
    }
}

inline int cmd_sim(const std::string& program, const RunOptions& o, Io io) {
    SystemConfig cfg;
    try {
        cfg = make_config(o);
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kUsage;
    }
    try {
        const auto prog = load_program(program);
        System sys(cfg);
        std::ofstream trace_file;
        if (!o.trace.empty()) {
            trace_file.open(o.trace);
            if (!trace_file) throw load_error("cannot write '" + o.trace + "'");
        }
        const auto rep = sys.run(prog, o.trace.empty() ? nullptr : &trace_file);
        auto stats = to_json(rep);
        stats["outputs"] = sys.fifo_out();
        if (!o.stats.empty()) write_file(o.stats, stats.dump(2) + '\n');
        io.out << "cycles " << rep.cycles.total << " (" << format_seconds(rep.seconds()) << " s at "
               << rep.clock_mhz << " MHz)\n";
        for (auto v : sys.fifo_out()) io.out << v << '\n';
        return kOk;
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kFail;
    }
}

struct GemvArgs {
    unsigned m = 0;
    unsigned n = 0;
    unsigned w = 8;
    bool is_unsigned = false;
    std::string matrix;
    std::string vector;
};

inline int cmd_gemv(const GemvArgs& g, const RunOptions& o, Io io) {
    SystemConfig cfg;
    GemvProblem prob{g.m, g.n, g.w, !g.is_unsigned};
    GemvInstance inst;
    try {
        if (g.m < 1 || g.n < 1) throw range_error("gemv: M and N must be >= 1");
        cfg = make_config(o);
        inst = random_instance(prob, o.seed);
        if (!g.matrix.empty()) inst.a = read_csv(g.matrix);
        if (!g.vector.empty()) inst.x = as_vector(read_csv(g.vector));
        plan(prob, cfg);
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kUsage;
    }

    GemvRun run;
    try {
        std::ofstream trace_file;
        if (!o.trace.empty()) {
            trace_file.open(o.trace);
            if (!trace_file) throw load_error("cannot write '" + o.trace + "'");
        }
        run = run_gemv(cfg, prob, inst, o.trace.empty() ? nullptr : &trace_file);
    } catch (const load_error& e) {
        io.err << e.what() << '\n';
        return kUsage;
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kFail;
    }

    const auto expect = reference_gemv(inst.a, inst.x);
    int status = kOk;
    if (run.y.size() != expect.size()) {
        io.err << "output length " << run.y.size() << ", expected " << expect.size() << '\n';
        status = kFail;
    } else {
        for (std::size_t i = 0; i < expect.size(); ++i) {
            if (run.y[i] != expect[i]) {
                io.err << "mismatch at y[" << i << "]: got " << run.y[i] << ", expected " << expect[i] << '\n';
                status = kFail;
                break;
            }
        }
    }
    const auto measured = run.report.cycles.total;
    const auto predicted = run.plan.predicted_cycles;
    if (measured != predicted) {
        io.err << "cycle mismatch: measured " << measured << ", predicted " << predicted << '\n';
        status = kFail;
    }

    if (!o.csv.empty()) {
        Matrix y(static_cast<unsigned>(run.y.size()), 1);
        y.data = run.y;
        write_file(o.csv, to_csv(y));
    }
    if (!o.stats.empty()) {
        auto stats = to_json(run.report);
        stats["predicted_cycles"] = predicted;
        stats["measured_cycles"] = measured;
        stats["seed"] = o.seed;
        stats["verified"] = status == kOk;
        stats["plan"] = to_json(run.plan);
        write_file(o.stats, stats.dump(2) + '\n');
    }
    io.out << "gemv M=" << g.m << " N=" << g.n << " W=" << g.w << (g.is_unsigned ? " unsigned" : "")
           << " radix=" << cfg.radix << " slice=" << cfg.slice << ": cycles " << measured << " (predicted "
           << predicted << "), " << format_seconds(run.report.seconds()) << " s, "
           << (status == kOk ? "verified" : "FAILED") << '\n';
    return status;
}

struct Variant {
    std::string name;
    unsigned radix;
    unsigned slice;
};

inline std::optional<Variant> parse_variant(const std::string& s) {
    if (s == "baseline") return Variant{s, 2, 1};
    if (s == "radix4") return Variant{s, 4, 1};
    if (s == "slice4") return Variant{s, 2, 4};
    if (s == "slice4+radix4") return Variant{s, 4, 4};
    return std::nullopt;
}

struct SweepArgs {
    std::vector<unsigned> dims;
    std::vector<unsigned> widths;
    std::vector<std::string> variants;
    unsigned jobs = 1;
};

struct SweepRow {
    unsigned dim = 0;
    unsigned w = 0;
    std::string variant;
    std::uint64_t cycles = 0;
    double seconds = 0;
    std::string error;
    int status = kOk;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::string out = "dim,W,variant,cycles,seconds\n";
    for (const auto& r : rows)
        out += std::to_string(r.dim) + ',' + std::to_string(r.w) + ',' + r.variant + ',' + std::to_string(r.cycles) +
               ',' + format_seconds(r.seconds) + '\n';
    return out;
}

inline int cmd_sweep(const SweepArgs& s, const RunOptions& o, Io io) {
    if (s.dims.empty() || s.widths.empty()) {
        io.err << "sweep: dims and widths must be non-empty\n";
        return kUsage;
    }
    std::vector<std::string> names = s.variants;
    if (names.empty()) {
        names.push_back("baseline");
        if (o.radix4 && o.slice4) names.push_back("slice4+radix4");
        else if (o.radix4) names.push_back("radix4");
        else if (o.slice4) names.push_back("slice4");
    }
    std::vector<Variant> variants;
    SystemConfig base;
    try {
        for (const auto& n : names) {
            auto v = parse_variant(n);
            if (!v) throw range_error("sweep: unknown variant '" + n + "'");
            variants.push_back(*v);
        }
        RunOptions plain = o;
        plain.radix4 = plain.slice4 = false;
        base = make_config(plain);
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kUsage;
    }

    auto canon = [](std::vector<unsigned> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    };
    std::vector<SweepRow> rows;
    for (unsigned w : canon(s.widths))
        for (unsigned d : canon(s.dims))
            for (const auto& v : variants) rows.push_back(SweepRow{d, w, v.name, 0, 0.0, {}, kOk});

    auto work = [&](SweepRow& row) {
        const auto v = *parse_variant(row.variant);
        SystemConfig cfg = base;
        cfg.radix = v.radix;
        cfg.slice = v.slice;
        const GemvProblem prob{row.dim, row.dim, row.w, true};
        try {
            const auto inst = random_instance(prob, o.seed);
            const auto run = run_gemv(cfg, prob, inst);
            row.cycles = run.report.cycles.total;
            row.seconds = run.report.seconds();
            if (run.y != reference_gemv(inst.a, inst.x)) {
                row.error = "output mismatch";
                row.status = kFail;
            } else if (row.cycles != run.plan.predicted_cycles) {
                row.error = "cycle mismatch (predicted " + std::to_string(run.plan.predicted_cycles) + ")";
                row.status = kFail;
            }
        } catch (const capacity_error& e) {
            row.error = e.what();
            row.status = kUsage;
        } catch (const range_error& e) {
            row.error = e.what();
            row.status = kUsage;
        } catch (const error& e) {
            row.error = e.what();
            row.status = kFail;
        }
    };

    const unsigned jobs = std::max(1u, std::min<unsigned>(s.jobs, static_cast<unsigned>(rows.size())));
    if (jobs == 1) {
        for (auto& r : rows) work(r);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned j = 0; j < jobs; ++j)
            pool.emplace_back([&] {
                for (std::size_t i; (i = next++) < rows.size();) work(rows[i]);
            });
        for (auto& t : pool) t.join();
    }

    for (const auto& r : rows) {
        if (r.status != kOk) {
            io.err << "sweep point dim=" << r.dim << " W=" << r.w << " variant=" << r.variant << " failed: " << r.error
                   << '\n';
            return r.status;
        }
    }
    const auto csv = sweep_csv(rows);
    try {
        if (o.csv.empty()) io.out << csv;
        else write_file(o.csv, csv);
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return kUsage;
    }
    return kOk;
}

inline std::optional<perf::Database> open_db(const std::string& path, Io io) {
    try {
        return perf::load_database(path.empty() ? perf::default_db_path() : path);
    } catch (const error& e) {
        io.err << e.what() << '\n';
        return std::nullopt;
    }
}

inline int cmd_devices(const std::string& db_path, const RunOptions& o, Io io) {
    const auto db = open_db(db_path, io);
    if (!db) return kUsage;
    std::ostringstream csv;
    csv << "id,part,family,bram_count,max_pe,max_pe_display,peak_tops\n";
    const double mac = static_cast<double>(perf::microcode_mac_cycles());
    io.out << std::left << std::setw(6) << "id" << std::setw(18) << "part" << std::setw(7) << "family" << std::right
           << std::setw(6) << "BRAM" << std::setw(8) << "PEs" << std::setw(6) << "K" << std::setw(8) << "TOPS" << '\n';
    for (const auto& d : db->devices) {
        const auto pes = perf::max_pe(d.bram_count);
        const double tops = perf::peak_tops(pes, perf::kImagineClockMhz, mac);
        io.out << std::left << std::setw(6) << d.id << std::setw(18) << d.part << std::setw(7) << d.family
               << std::right << std::setw(6) << d.bram_count << std::setw(8) << pes << std::setw(6)
               << perf::format_k(pes) << std::setw(8) << fixed(tops, 3) << '\n';
        csv << d.id << ',' << d.part << ',' << d.family << ',' << d.bram_count << ',' << pes << ','
            << perf::format_k(pes) << ',' << fixed(tops, 4) << '\n';
    }
    const auto u55 = std::find_if(db->devices.begin(), db->devices.end(), [](const auto& d) { return d.id == "U55"; });
    if (u55 != db->devices.end()) {
        const auto pes = perf::max_pe(u55->bram_count);
        io.out << "\npeak at " << perf::kImagineClockMhz << " MHz on U55: " << fixed(mac, 0)
               << " cycles/MAC (8-bit microcode) -> " << fixed(perf::peak_tops(pes, perf::kImagineClockMhz, mac), 3)
               << " TOPS; the 0.33 TOPS figure implies "
               << fixed(perf::implied_mac_cycles(pes, perf::kImagineClockMhz, 0.33), 2) << " cycles/MAC\n";
    }
    if (!o.csv.empty()) {
        try {
            write_file(o.csv, csv.str());
        } catch (const error& e) {
            io.err << e.what() << '\n';
            return kUsage;
        }
    }
    return kOk;
}

inline int cmd_compare(const std::string& db_path, const RunOptions& o, Io io) {
    const auto db = open_db(db_path, io);
    if (!db) return kUsage;
    std::ostringstream csv;
    csv << "name,f_sys_mhz,bram_fmax_mhz,rel_freq_pct,speedup\n";
    std::vector<double> all, basis;
    io.out << std::left << std::setw(16) << "name" << std::right << std::setw(9) << "f_sys" << std::setw(9) << "rel"
           << std::setw(9) << "speedup" << '\n';
    for (const auto& c : db->competitors) {
        const double rel = perf::relative_freq(c.f_sys_mhz, c.bram_fmax_mhz);
        const double speedup = perf::kImagineClockMhz / c.f_sys_mhz;
        io.out << std::left << std::setw(16) << c.name << std::right << std::setw(5) << fixed(c.f_sys_mhz, 0)
               << " MHz" << std::setw(8) << fixed(rel, 1) << '%' << std::setw(8) << fixed(speedup, 2) << "x\n";
        csv << '"' << c.name << "\"," << fixed(c.f_sys_mhz, 0) << ',' << fixed(c.bram_fmax_mhz, 1) << ','
            << fixed(rel, 1) << ',' << fixed(speedup, 2) << '\n';
        if (c.name != "IMAGine") all.push_back(c.f_sys_mhz);
        if (c.claim_basis) basis.push_back(c.f_sys_mhz);
    }
    if (!basis.empty()) {
        const auto [lo, hi] = perf::clock_speedup_range(perf::kImagineClockMhz, basis);
        io.out << "\nclock speedup (largest configurations): " << fixed(lo, 2) << "x - " << fixed(hi, 2) << "x\n";
    }
    if (!all.empty()) {
        const auto [lo, hi] = perf::clock_speedup_range(perf::kImagineClockMhz, all);
        io.out << "clock speedup (all engines): " << fixed(lo, 2) << "x - " << fixed(hi, 2) << "x\n";
    }
    if (!db->pim_designs.empty()) {
        io.out << '\n' << std::left << std::setw(12) << "design" << std::right << std::setw(8) << "f_BRAM"
               << std::setw(8) << "f_PIM" << std::setw(7) << "rel" << std::setw(8) << "f_sys" << std::setw(7)
               << "rel" << '\n';
        for (const auto& p : db->pim_designs) {
            io.out << std::left << std::setw(12) << p.name << std::right << std::setw(8) << fixed(p.f_bram_mhz, 0)
                   << std::setw(8) << fixed(p.f_pim_mhz, 0) << std::setw(6)
                   << fixed(perf::relative_freq(p.f_pim_mhz, p.f_bram_mhz), 0) << '%';
            if (p.f_sys_mhz)
                io.out << std::setw(8) << fixed(*p.f_sys_mhz, 0) << std::setw(6)
                       << fixed(perf::relative_freq(*p.f_sys_mhz, p.f_bram_mhz), 0) << '%';
            else
                io.out << std::setw(8) << '-' << std::setw(7) << '-';
            io.out << '\n';
        }
    }
    if (!o.csv.empty()) {
        try {
            write_file(o.csv, csv.str());
        } catch (const error& e) {
            io.err << e.what() << '\n';
            return kUsage;
        }
    }
    return kOk;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, Io io) {
    CLI::App app{"bit-serial PIM GEMV overlay simulator"};
    app.require_subcommand(1);
    RunOptions opt;
    auto add_common = [&opt](CLI::App* c) {
        c->add_option("--config", opt.config, "system config (JSON)");
        c->add_option("--seed", opt.seed, "random seed")->capture_default_str();
        c->add_flag("--radix4", opt.radix4, "radix-4 Booth multiplication");
        c->add_flag("--slice4", opt.slice4, "4-bit sliced accumulation network");
        c->add_option("--trace", opt.trace, "per-cycle trace file");
        c->add_option("--csv", opt.csv, "CSV output file");
        c->add_option("--stats", opt.stats, "stats JSON file");
    };

    std::string asm_src, asm_out;
    bool asm_dis = false;
    auto* c_asm = app.add_subcommand("asm", "assemble a source file into an IMG1 binary");
    c_asm->add_option("source", asm_src)->required();
    c_asm->add_option("-o,--output", asm_out, "output path (default a.img; stdout with -d)");
    c_asm->add_flag("-d,--disassemble", asm_dis, "print the source form of a program");

    std::string sim_prog;
    auto* c_sim = app.add_subcommand("sim", "run a program (source or binary) to halt");
    c_sim->add_option("program", sim_prog)->required();
    add_common(c_sim);

    GemvArgs gemv;
    auto* c_gemv = app.add_subcommand("gemv", "generate, run and verify a random GEMV");
    c_gemv->add_option("M", gemv.m, "output rows")->required();
    c_gemv->add_option("N", gemv.n, "input columns")->required();
    c_gemv->add_option("W", gemv.w, "operand width (2, 4, 8, 16)")->required();
    c_gemv->add_flag("--unsigned", gemv.is_unsigned, "unsigned operands");
    c_gemv->add_option("--matrix", gemv.matrix, "matrix CSV instead of random data");
    c_gemv->add_option("--vector", gemv.vector, "vector CSV instead of random data");
    add_common(c_gemv);

    SweepArgs sweep;
    sweep.dims = {16, 32, 64};
    sweep.widths = {4, 8, 16};
    auto* c_sweep = app.add_subcommand("sweep", "latency sweep over square GEMV sizes");
    c_sweep->add_option("--dims", sweep.dims)->delimiter(',')->capture_default_str();
    c_sweep->add_option("--widths", sweep.widths)->delimiter(',')->capture_default_str();
    c_sweep->add_option("--variants", sweep.variants, "baseline, radix4, slice4, slice4+radix4")->delimiter(',');
    c_sweep->add_option("-j,--jobs", sweep.jobs, "worker threads")->capture_default_str();
    add_common(c_sweep);

    std::string db_path;
    auto* c_dev = app.add_subcommand("devices", "device table: BRAMs and maximum PE count");
    c_dev->add_option("--db", db_path, "database (default $IMAGINE_DB or the bundled file)");
    c_dev->add_option("--csv", opt.csv);
    auto* c_cmp = app.add_subcommand("compare", "clock comparison against other PIM engines");
    c_cmp->add_option("--db", db_path);
    c_cmp->add_option("--csv", opt.csv);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        io.out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp& e) {
        io.out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        io.err << e.what() << '\n';
        return kUsage;
    }

    if (c_asm->parsed()) return cmd_asm(asm_src, asm_out, asm_dis, io);
    if (c_sim->parsed()) return cmd_sim(sim_prog, opt, io);
    if (c_gemv->parsed()) return cmd_gemv(gemv, opt, io);
    if (c_sweep->parsed()) return cmd_sweep(sweep, opt, io);
    if (c_dev->parsed()) return cmd_devices(db_path, opt, io);
    if (c_cmp->parsed()) return cmd_compare(db_path, opt, io);
    return kUsage;
}

} // namespace imagine::cli
