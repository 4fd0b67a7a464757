#pragma once

// GEMV planner, code generator and closed-form latency model, plus the
// host-side loaders, integer oracle and a seeded problem generator.
//
// Layout (one output lane per block row):
//   lanes  = block rows of the grid
//   C      = cols_per_pe = ceil(N / (16 * block_cols))
//   R      = rows_per_pe = ceil(M / lanes)
//   row r  -> fold r / lanes, lane r % lanes
//   elem c -> global PE column c / C (block column g / 16, PE g % 16), slot c % C
//   a[f][k] at rows (f*C + k)*W, x[k] at 512 + k*W (replicated in every lane)

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/params.hpp"
#include "imagine/pimcore.hpp"
#include "imagine/system.hpp"

namespace imagine {

// Register map.
inline constexpr unsigned kMatrixBase = 0;
inline constexpr unsigned kMatrixRows = 512;
inline constexpr unsigned kVectorBase = 512;
inline constexpr unsigned kVectorRows = 256;
inline constexpr unsigned kAccBase = 768;
inline constexpr unsigned kAccRows = 128;
inline constexpr unsigned kScratchBase = 896;
inline constexpr unsigned kScratchRows = 128;

struct Matrix {
    unsigned rows = 0;
    unsigned cols = 0;
    std::vector<std::int64_t> data;

    Matrix() = default;
    Matrix(unsigned r, unsigned c) : rows(r), cols(c), data(std::size_t{r} * c, 0) {}

    std::int64_t& at(unsigned r, unsigned c) { return data.at(std::size_t{r} * cols + c); }
    std::int64_t at(unsigned r, unsigned c) const { return data.at(std::size_t{r} * cols + c); }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

struct GemvProblem {
    unsigned m = 1;
    unsigned n = 1;
    unsigned width = 8;
    bool is_signed = true;
};

inline unsigned ceil_log2(unsigned n) { return n <= 1 ? 0 : static_cast<unsigned>(std::bit_width(n - 1)); }

struct Phase {
    std::string name;
    std::uint64_t count = 0;     // instructions (or cycles for fanout)
    std::uint64_t unit_cycles = 0;

    std::uint64_t cycles() const { return count * unit_cycles; }
};

struct GemvPlan {
    GemvProblem problem;
    unsigned op_width = 8;   // width the operands are stored and multiplied at
    unsigned acc_width = 16;
    unsigned cols_per_pe = 1;
    unsigned rows_per_pe = 1;
    unsigned lanes = 1;
    unsigned block_cols = 1;
    unsigned hop_levels = 0;
    unsigned radix = 2;
    unsigned slice = 1;
    unsigned d_alu = 2;
    unsigned fanout = 0;
    std::vector<Phase> schedule;
    std::uint64_t predicted_cycles = 0;

    unsigned a_row(unsigned fold, unsigned slot) const { return kMatrixBase + (fold * cols_per_pe + slot) * op_width; }
    unsigned x_row(unsigned slot) const { return kVectorBase + slot * op_width; }

    OpParams params() const {
        OpParams p;
        p.width = op_width;
        p.acc_width = acc_width;
        p.is_signed = true;
        p.radix = radix;
        p.slice = slice;
        return p;
    }
};

// Closed-form cycle count, built from the phase list. Costs are written out
// here rather than taken from the simulator.
inline std::vector<Phase> schedule_for(const GemvPlan& p) {
    const std::uint64_t w = p.op_width, wacc = p.acc_width, d = p.d_alu;
    const std::uint64_t passes = p.radix == 4 ? (w + 1) / 2 : w;
    const std::uint64_t mult = 1 + passes * (w + 2) + d;
    const std::uint64_t add = 1 + wacc + d;
    const std::uint64_t accb = 1 + wacc + d;
    const std::uint64_t stream = 1 + (wacc + p.slice - 1) / p.slice + d;
    const std::uint64_t r = p.rows_per_pe, c = p.cols_per_pe;
    return {
        {"fanout", p.fanout, 1},
        {"setup", 2, 1},
        {"mult", r * c, mult},
        {"add", r * c, add},
        {"reduce_block", 4 * r, accb},
        {"reduce_hop", p.hop_levels * r, stream},
        {"readout", r, stream},
        {"shift_out", p.problem.m, 1},
    };
}

inline std::uint64_t latency(const GemvPlan& p) {
    std::uint64_t total = 0;
    for (const auto& ph : schedule_for(p)) total += ph.cycles();
    return total;
}

inline GemvPlan plan(const GemvProblem& prob, const SystemConfig& cfg) {
    if (prob.m < 1 || prob.n < 1) throw range_error("gemv: M and N must be >= 1");
    if (!valid_width(prob.width)) throw range_error("gemv: W must be one of 2, 4, 8, 16");
    cfg.validate();

    GemvPlan p;
    p.problem = prob;
    p.op_width = prob.width;
    if (!prob.is_signed) {
        if (prob.width == 16)
            throw capacity_error("unsigned 16-bit operands need 17-bit signed multiplication (max 16)");
        p.op_width = prob.width * 2;
    }
    p.acc_width = 2 * p.op_width + ceil_log2(prob.n);
    p.lanes = cfg.lanes();
    p.block_cols = cfg.block_cols();
    p.hop_levels = cfg.hop_levels();
    p.radix = cfg.radix;
    p.slice = cfg.slice;
    p.d_alu = cfg.tile.d_alu;
    p.fanout = cfg.fanout_latency();
    p.cols_per_pe = pim::ceil_div(prob.n, pim::kPes * p.block_cols);
    p.rows_per_pe = pim::ceil_div(prob.m, p.lanes);

    const unsigned w = p.op_width, c = p.cols_per_pe, r = p.rows_per_pe;
    auto need = [](unsigned used, unsigned have, const std::string& what) {
        if (used > have)
            throw capacity_error(what + ": needs " + std::to_string(used) + " rows, " + std::to_string(have) +
                                 " available");
    };
    need(c * w, kVectorRows, "vector region (cols_per_pe * W)");
    need(c * r * w, kMatrixRows, "matrix region (cols_per_pe * rows_per_pe * W)");
    need(p.acc_width, std::min(kAccRows, kMaxAccWidth), "accumulator (Wacc)");
    need(2 * w, kScratchRows, "product scratch (2W)");
    if (prob.m > std::uint64_t{p.lanes} * r) throw capacity_error("output lanes");

    p.schedule = schedule_for(p);
    p.predicted_cycles = latency(p);
    return p;
}

inline isa::Program codegen(const GemvPlan& p) {
    using namespace isa;
    Program prog;
    auto& code = prog.code;
    code.push_back(set_params(p.params()));
    code.push_back(set_ptr(kScratchBase));
    for (unsigned f = 0; f < p.rows_per_pe; ++f) {
        for (unsigned k = 0; k < p.cols_per_pe; ++k) {
            code.push_back(mult(p.a_row(f, k), p.x_row(k)));
            Word fn = addfn::kDestA | addfn::kAccumulate;
            if (k == 0) fn |= addfn::kZeroA;
            code.push_back(add(kAccBase, kScratchBase, fn));
        }
        for (unsigned s = 0; s < 4; ++s) code.push_back(acc_blk(s, kAccBase, kAccBase));
        for (unsigned s = 0; s < p.hop_levels; ++s) code.push_back(acc_hop(s, kAccBase, kAccBase));
        code.push_back(read_out(kAccBase));
        const unsigned first = f * p.lanes;
        const unsigned count = std::min(p.lanes, p.problem.m - first);
        for (unsigned i = 0; i < count; ++i) code.push_back(shift_out());
    }
    code.push_back(halt());
    return prog;
}

inline nlohmann::ordered_json to_json(const GemvPlan& p) {
    nlohmann::ordered_json j;
    j["M"] = p.problem.m;
    j["N"] = p.problem.n;
    j["W"] = p.problem.width;
    j["signed"] = p.problem.is_signed;
    j["op_width"] = p.op_width;
    j["Wacc"] = p.acc_width;
    j["rows_per_pe"] = p.rows_per_pe;
    j["cols_per_pe"] = p.cols_per_pe;
    j["lanes"] = p.lanes;
    j["block_cols"] = p.block_cols;
    j["hop_levels"] = p.hop_levels;
    j["radix"] = p.radix;
    j["slice"] = p.slice;
    auto sched = nlohmann::ordered_json::array();
    for (const auto& ph : p.schedule)
        sched.push_back({{"phase", ph.name}, {"count", ph.count}, {"unit_cycles", ph.unit_cycles}, {"cycles", ph.cycles()}});
    j["schedule"] = sched;
    j["predicted_cycles"] = p.predicted_cycles;
    return j;
}

// ---------------------------------------------------------------------------
// Host side
// ---------------------------------------------------------------------------

inline void check_fits(std::int64_t v, unsigned width, bool is_signed, const std::string& name) {
    const std::int64_t lo = is_signed ? -(std::int64_t{1} << (width - 1)) : 0;
    const std::int64_t hi = is_signed ? (std::int64_t{1} << (width - 1)) - 1 : (std::int64_t{1} << width) - 1;
    if (v < lo || v > hi)
        throw load_error(name + " = " + std::to_string(v) + " does not fit in " + std::to_string(width) + "-bit " +
                         (is_signed ? "signed" : "unsigned"));
}

inline void load_matrix(System& sys, const Matrix& a, const GemvPlan& p) {
    const auto& prob = p.problem;
    if (a.rows != prob.m || a.cols != prob.n)
        throw load_error("matrix is " + std::to_string(a.rows) + "x" + std::to_string(a.cols) + ", plan expects " +
                         std::to_string(prob.m) + "x" + std::to_string(prob.n));
    if (sys.config().lanes() != p.lanes || sys.config().block_cols() != p.block_cols)
        throw load_error("plan does not match the system grid");
    for (unsigned r = 0; r < a.rows; ++r)
        for (unsigned c = 0; c < a.cols; ++c)
            check_fits(a.at(r, c), prob.width, prob.is_signed,
                       "A[" + std::to_string(r) + "][" + std::to_string(c) + "]");
    for (unsigned lane = 0; lane < p.lanes; ++lane) {
        for (unsigned bc = 0; bc < p.block_cols; ++bc) {
            auto& rf = sys.block(lane, bc).regfile;
            for (unsigned pe = 0; pe < pim::kPes; ++pe) {
                const unsigned g = bc * pim::kPes + pe;
                for (unsigned f = 0; f < p.rows_per_pe; ++f) {
                    const unsigned r = f * p.lanes + lane;
                    for (unsigned k = 0; k < p.cols_per_pe; ++k) {
                        const unsigned c = g * p.cols_per_pe + k;
                        const std::int64_t v = (r < prob.m && c < prob.n) ? a.at(r, c) : 0;
                        pim::store_value(rf, p.a_row(f, k), p.op_width, pe, v);
                    }
                }
            }
        }
    }
}

inline void load_vector(System& sys, const std::vector<std::int64_t>& x, const GemvPlan& p) {
    const auto& prob = p.problem;
    if (x.size() != prob.n)
        throw load_error("vector has " + std::to_string(x.size()) + " entries, plan expects " + std::to_string(prob.n));
    for (std::size_t c = 0; c < x.size(); ++c)
        check_fits(x[c], prob.width, prob.is_signed, "x[" + std::to_string(c) + "]");
    for (unsigned lane = 0; lane < p.lanes; ++lane) {
        for (unsigned bc = 0; bc < p.block_cols; ++bc) {
            auto& rf = sys.block(lane, bc).regfile;
            for (unsigned pe = 0; pe < pim::kPes; ++pe) {
                const unsigned g = bc * pim::kPes + pe;
                for (unsigned k = 0; k < p.cols_per_pe; ++k) {
                    const unsigned c = g * p.cols_per_pe + k;
                    pim::store_value(rf, p.x_row(k), p.op_width, pe, c < prob.n ? x[c] : 0);
                }
            }
        }
    }
}

// Exact integer oracle.
inline std::vector<std::int64_t> reference_gemv(const Matrix& a, const std::vector<std::int64_t>& x) {
    std::vector<std::int64_t> y(a.rows, 0);
    for (unsigned r = 0; r < a.rows; ++r)
        for (unsigned c = 0; c < a.cols; ++c) y[r] += a.at(r, c) * x.at(c);
    return y;
}

inline constexpr std::uint64_t kDefaultSeed = 20240521;

struct GemvInstance {
    Matrix a;
    std::vector<std::int64_t> x;
};

// Uniform over the full W-bit range; row 0 and x start with the boundary
// values (min, max, 0, -1 / 1).
inline GemvInstance random_instance(const GemvProblem& prob, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const std::int64_t lo = prob.is_signed ? -(std::int64_t{1} << (prob.width - 1)) : 0;
    const std::int64_t hi =
        prob.is_signed ? (std::int64_t{1} << (prob.width - 1)) - 1 : (std::int64_t{1} << prob.width) - 1;
    std::uniform_int_distribution<std::int64_t> dist(lo, hi);
    const std::int64_t edge[] = {lo, hi, 0, prob.is_signed ? -1 : 1};
    GemvInstance inst{Matrix(prob.m, prob.n), std::vector<std::int64_t>(prob.n)};
    for (unsigned r = 0; r < prob.m; ++r)
        for (unsigned c = 0; c < prob.n; ++c) inst.a.at(r, c) = r == 0 ? edge[c % 4] : dist(rng);
    for (unsigned c = 0; c < prob.n; ++c) inst.x[c] = c < 4 ? edge[(c + 1) % 4] : dist(rng);
    return inst;
}

struct GemvRun {
    GemvPlan plan;
    std::vector<std::int64_t> y;
    LatencyReport report;
};

// Plans, loads, runs and collects y on a fresh system.
inline GemvRun run_gemv(const SystemConfig& cfg, const GemvProblem& prob, const GemvInstance& inst,
                        std::ostream* trace = nullptr) {
    GemvRun out;
    out.plan = plan(prob, cfg);
    System sys(cfg);
    load_matrix(sys, inst.a, out.plan);
    load_vector(sys, inst.x, out.plan);
    out.report = sys.run(codegen(out.plan), trace);
    out.y = sys.fifo_out();
    return out;
}

// ---------------------------------------------------------------------------
// CSV of decimal integers, row-major.
// ---------------------------------------------------------------------------

inline Matrix parse_csv(const std::string& text, const std::string& name = "csv") {
    Matrix m;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<std::int64_t> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            const auto a = cell.find_first_not_of(" \t");
            const auto b = cell.find_last_not_of(" \t");
            const std::string t = a == std::string::npos ? "" : cell.substr(a, b - a + 1);
            std::int64_t v = 0;
            auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
            if (t.empty() || ec != std::errc{} || p != t.data() + t.size())
                throw load_error(name + ":" + std::to_string(line_no) + ": bad integer '" + t + "'");
            row.push_back(v);
        }
        if (m.rows == 0) m.cols = static_cast<unsigned>(row.size());
        else if (row.size() != m.cols)
            throw load_error(name + ":" + std::to_string(line_no) + ": expected " + std::to_string(m.cols) +
                             " values, got " + std::to_string(row.size()));
        m.data.insert(m.data.end(), row.begin(), row.end());
        ++m.rows;
    }
    return m;
}

inline Matrix read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw load_error("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str(), path);
}

inline std::string to_csv(const Matrix& m) {
    std::string out;
    for (unsigned r = 0; r < m.rows; ++r) {
        for (unsigned c = 0; c < m.cols; ++c) {
            if (c) out += ',';
            out += std::to_string(m.at(r, c));
        }
        out += '\n';
    }
    return out;
}

// A single CSV row or a single column both read as a vector.
inline std::vector<std::int64_t> as_vector(const Matrix& m) {
    if (m.rows != 1 && m.cols != 1) throw load_error("expected a single row or column");
    return m.data;
}

} // namespace imagine
