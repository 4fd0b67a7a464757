#pragma once

// Top-level engine: a grid of tiles fed through the input registers and the
// global fanout tree, the east-to-west accumulation network and the output
// column of shift registers. run() is the master cycle loop.

#include <bit>
#include <cstdint>
#include <deque>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "imagine/assembler.hpp"
#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/pimcore.hpp"
#include "imagine/tile.hpp"

namespace imagine {

struct SystemConfig {
    unsigned tile_rows = 1;
    unsigned tile_cols = 1;
    TileConfig tile;
    unsigned global_fanout_levels = 1;
    double clock_mhz = 737.0;
    unsigned slice = 1;
    unsigned radix = 2;
    std::uint64_t max_cycles = 100'000'000;

    unsigned block_rows() const noexcept { return tile_rows * tile.block_rows; }
    unsigned block_cols() const noexcept { return tile_cols * tile.block_cols; }
    unsigned lanes() const noexcept { return block_rows(); }
    unsigned total_blocks() const noexcept { return block_rows() * block_cols(); }
    unsigned total_pes() const noexcept { return total_blocks() * pim::kPes; }

    // Cycles before the first instruction reaches the tile controllers.
    unsigned fanout_latency() const noexcept { return global_fanout_levels + tile.issue_latency(); }

    // ceil(log2(block columns))
    unsigned hop_levels() const noexcept { return static_cast<unsigned>(std::bit_width(block_cols() - 1u)); }

    void validate() const {
        tile.validate();
        if (tile_rows < 1 || tile_cols < 1) throw config_error("tile grid must be at least 1x1");
        if (!(clock_mhz > 0)) throw config_error("clock_mhz must be > 0");
        if (slice != 1 && slice != 4) throw config_error("slice must be 1 or 4");
        if (radix != 2 && radix != 4) throw config_error("radix must be 2 or 4");
        if (total_blocks() > 8192) throw config_error("grid exceeds 8192 blocks (13-bit block ids)");
        if (max_cycles == 0) throw config_error("max_cycles must be > 0");
    }
};

inline nlohmann::json to_json(const SystemConfig& c) {
    return {
        {"tile_rows", c.tile_rows},
        {"tile_cols", c.tile_cols},
        {"block_rows", c.tile.block_rows},
        {"block_cols", c.tile.block_cols},
        {"stage_a", c.tile.stage_a},
        {"stage_b", c.tile.stage_b},
        {"stage_c", c.tile.stage_c},
        {"tile_fanout_levels", c.tile.fanout_levels},
        {"tile_fanout_degree", c.tile.fanout_degree},
        {"d_alu", c.tile.d_alu},
        {"global_fanout_levels", c.global_fanout_levels},
        {"clock_mhz", c.clock_mhz},
        {"slice", c.slice},
        {"radix", c.radix},
        {"max_cycles", c.max_cycles},
    };
}

// Unknown keys are rejected; missing keys keep their defaults.
inline SystemConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw config_error("config: expected a JSON object");
    SystemConfig c;
    auto get_uint = [](const nlohmann::json& v, const std::string& k) -> unsigned {
        if (!v.is_number_unsigned()) throw config_error("config: '" + k + "' must be a non-negative integer");
        return v.get<unsigned>();
    };
    auto get_bool = [](const nlohmann::json& v, const std::string& k) {
        if (!v.is_boolean()) throw config_error("config: '" + k + "' must be a boolean");
        return v.get<bool>();
    };
    for (const auto& [k, v] : j.items()) {
        if (k == "tile_rows") c.tile_rows = get_uint(v, k);
        else if (k == "tile_cols") c.tile_cols = get_uint(v, k);
        else if (k == "block_rows") c.tile.block_rows = get_uint(v, k);
        else if (k == "block_cols") c.tile.block_cols = get_uint(v, k);
        else if (k == "stage_a") c.tile.stage_a = get_bool(v, k);
        else if (k == "stage_b") c.tile.stage_b = get_bool(v, k);
        else if (k == "stage_c") c.tile.stage_c = get_bool(v, k);
        else if (k == "tile_fanout_levels") c.tile.fanout_levels = get_uint(v, k);
        else if (k == "tile_fanout_degree") c.tile.fanout_degree = get_uint(v, k);
        else if (k == "d_alu") c.tile.d_alu = get_uint(v, k);
        else if (k == "global_fanout_levels") c.global_fanout_levels = get_uint(v, k);
        else if (k == "slice") c.slice = get_uint(v, k);
        else if (k == "radix") c.radix = get_uint(v, k);
        else if (k == "max_cycles") {
            if (!v.is_number_unsigned()) throw config_error("config: 'max_cycles' must be a non-negative integer");
            c.max_cycles = v.get<std::uint64_t>();
        } else if (k == "clock_mhz") {
            if (!v.is_number()) throw config_error("config: 'clock_mhz' must be a number");
            c.clock_mhz = v.get<double>();
        } else {
            throw config_error("config: unknown key '" + k + "'");
        }
    }
    c.validate();
    return c;
}

inline SystemConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("config '" + path + "': " + e.what());
    }
    return config_from_json(j);
}

struct CycleBreakdown {
    std::uint64_t fanout = 0;
    std::uint64_t compute = 0;
    std::uint64_t reduce_block = 0;
    std::uint64_t reduce_hop = 0;
    std::uint64_t readout = 0;
    std::uint64_t total = 0;

    friend bool operator==(const CycleBreakdown&, const CycleBreakdown&) = default;
};

struct LatencyReport {
    CycleBreakdown cycles;
    std::map<std::string, std::uint64_t> histogram;
    double clock_mhz = 737.0;

    double seconds() const { return static_cast<double>(cycles.total) / (clock_mhz * 1e6); }

    friend bool operator==(const LatencyReport&, const LatencyReport&) = default;
};

inline nlohmann::ordered_json to_json(const LatencyReport& r) {
    nlohmann::ordered_json j;
    j["cycles"] = {{"fanout", r.cycles.fanout},           {"compute", r.cycles.compute},
                   {"reduce_block", r.cycles.reduce_block}, {"reduce_hop", r.cycles.reduce_hop},
                   {"readout", r.cycles.readout},           {"total", r.cycles.total}};
    nlohmann::ordered_json hist = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.histogram) hist[k] = v;
    j["instructions"] = hist;
    j["clock_mhz"] = r.clock_mhz;
    j["seconds"] = r.seconds();
    return j;
}

inline std::uint64_t& category(CycleBreakdown& c, isa::Opcode op) {
    using isa::Opcode;
    switch (op) {
    case Opcode::AccBlk: return c.reduce_block;
    case Opcode::AccHop: return c.reduce_hop;
    case Opcode::ReadOut:
    case Opcode::ShiftOut: return c.readout;
    default: return c.compute;
    }
}

// Column of shift registers west of the array, one per lane (block row).
// READ_OUT assembles each lane's PE-0 accumulator bit-serially; SHIFT_OUT
// moves the head element to the FIFO-out port.
class OutputColumn {
public:
    explicit OutputColumn(unsigned lanes = 0) : in(lanes), assembling_(lanes, 0) {}

    std::vector<pim::StreamLatch> in;

    void begin_capture() {
        std::fill(assembling_.begin(), assembling_.end(), 0);
        bits_ = 0;
    }

    void capture() {
        unsigned count = 0;
        for (std::size_t lane = 0; lane < in.size(); ++lane) {
            const auto& l = in[lane];
            if (!l.valid) continue;
            count = l.count;
            for (unsigned i = 0; i < l.count; ++i)
                assembling_[lane] |= std::uint64_t{l.rows[i] & 1u} << (bits_ + i);
        }
        bits_ += count;
    }

    void finish_capture(unsigned width, bool is_signed) {
        regs_.clear();
        for (auto v : assembling_) {
            if (width < 64) v &= (std::uint64_t{1} << width) - 1;
            if (is_signed && width < 64 && ((v >> (width - 1)) & 1)) v |= ~std::uint64_t{0} << width;
            regs_.push_back(static_cast<std::int64_t>(v));
        }
    }

    std::optional<std::int64_t> shift() {
        if (regs_.empty()) return std::nullopt;
        const auto v = regs_.front();
        regs_.pop_front();
        return v;
    }

    std::size_t pending() const noexcept { return regs_.size(); }

private:
    std::vector<std::uint64_t> assembling_;
    unsigned bits_ = 0;
    std::deque<std::int64_t> regs_;
};

class System {
public:
    explicit System(const SystemConfig& cfg = {}) : cfg_(cfg), column_(cfg.lanes()) {
        cfg_.validate();
        tiles_.reserve(std::size_t{cfg_.tile_rows} * cfg_.tile_cols);
        for (unsigned r = 0; r < cfg_.tile_rows; ++r)
            for (unsigned c = 0; c < cfg_.tile_cols; ++c) tiles_.emplace_back(cfg_.tile, r, c, cfg_.block_cols());
    }

    const SystemConfig& config() const noexcept { return cfg_; }

    Tile& tile(unsigned r, unsigned c) { return tiles_.at(std::size_t{r} * cfg_.tile_cols + c); }
    const Tile& tile(unsigned r, unsigned c) const { return tiles_.at(std::size_t{r} * cfg_.tile_cols + c); }

    // Block by grid coordinates (lane, column).
    pim::PimBlock& block(unsigned row, unsigned col) {
        const auto& t = cfg_.tile;
        return tile(row / t.block_rows, col / t.block_cols).block(row % t.block_rows, col % t.block_cols);
    }
    const pim::PimBlock& block(unsigned row, unsigned col) const {
        const auto& t = cfg_.tile;
        return tile(row / t.block_rows, col / t.block_cols).block(row % t.block_rows, col % t.block_cols);
    }

    const std::vector<std::int64_t>& fifo_out() const noexcept { return fifo_out_; }

    // Runs to HALT. total = fanout latency + sum of instruction costs.
    LatencyReport run(const isa::Program& prog, std::ostream* trace = nullptr) {
        isa::validate(prog);
        for (auto& t : tiles_) t.reset_control();
        fifo_out_.clear();

        LatencyReport rep;
        rep.clock_mhz = cfg_.clock_mhz;
        const unsigned depth = cfg_.fanout_latency();
        std::vector<std::optional<isa::Instruction>> chain(depth);
        std::size_t pc = 0;
        std::uint64_t cycle = 0;
        Tile& lead = tiles_.front();

        for (;; ++cycle) {
            if (cycle >= cfg_.max_cycles)
                throw timeout_error("no halt within " + std::to_string(cfg_.max_cycles) + " cycles");

            std::optional<isa::Instruction>* head = depth ? &chain[depth - 1] : nullptr;
            std::optional<isa::Instruction> direct;
            if (!depth && pc < prog.code.size()) direct = prog.code[pc];
            const auto& next = depth ? *head : direct;

            if (lead.controller().idle() && next) {
                const isa::Instruction in = *next;
                if (in.op == isa::Opcode::Halt) break;
                for (auto& t : tiles_) {
                    t.issue(in);
                    if (t.trap()) throw trap_error(cycle, t.trap()->message);
                }
                ++rep.histogram[std::string(isa::mnemonic(in.op))];
                if (depth) head->reset();
                else ++pc;
            }

            const auto& ctl = lead.controller();
            const bool busy = !ctl.idle();
            const isa::Instruction op = ctl.current;
            const unsigned t = ctl.cursor;
            if (trace) {
                *trace << "cycle " << cycle << ' ' << lead.state_string();
                if (busy) *trace << ' ' << isa::disassemble(op) << " t=" << t;
                *trace << '\n';
            }
            if (busy) ++category(rep.cycles, op.op);
            else ++rep.cycles.fanout;

            for (auto& tl : tiles_) {
                tl.cycle();
                if (tl.trap()) throw trap_error(cycle, tl.trap()->message);
            }
            if (busy) {
                step_column(op, ctl.params, t, cycle);
                route(op);
            }

            for (unsigned i = depth; i-- > 1;) {
                if (!chain[i] && chain[i - 1]) {
                    chain[i] = chain[i - 1];
                    chain[i - 1].reset();
                }
            }
            if (depth && !chain[0] && pc < prog.code.size()) chain[0] = prog.code[pc++];
        }
        rep.cycles.total = cycle;
        return rep;
    }

    // Shifts M elements out of the column, one per cycle.
    std::vector<std::int64_t> read_output(unsigned m, LatencyReport* report = nullptr) {
        if (m > cfg_.lanes())
            throw range_error("read_output: " + std::to_string(m) + " exceeds " + std::to_string(cfg_.lanes()) +
                              " output lanes");
        isa::Program p;
        p.code.assign(m, isa::shift_out());
        p.code.push_back(isa::halt());
        auto rep = run(p);
        if (report) *report = rep;
        return fifo_out_;
    }

    // Runs the binary-hopping reduction over all block columns; returns its
    // cycle count.
    std::uint64_t accumulate_hops(unsigned acc_row, unsigned acc_width) {
        const unsigned levels = cfg_.hop_levels();
        if (levels == 0) return 0;
        OpParams p;
        p.width = 2;
        p.acc_width = acc_width;
        p.slice = cfg_.slice;
        isa::Program prog;
        prog.code.push_back(set_params(p));
        for (unsigned s = 0; s < levels; ++s) prog.code.push_back(isa::acc_hop(s, acc_row, acc_row));
        prog.code.push_back(isa::halt());
        return run(prog).cycles.reduce_hop;
    }

private:
    void step_column(const isa::Instruction& op, const OpParams& params, unsigned t, std::uint64_t cycle) {
        if (op.op == isa::Opcode::ReadOut) {
            const unsigned beats = pim::ceil_div(params.acc_width, params.slice);
            if (t == 0) column_.begin_capture();
            else if (t <= beats) column_.capture();
            if (t == beats) column_.finish_capture(params.acc_width, params.is_signed);
        } else if (op.op == isa::Opcode::ShiftOut) {
            auto v = column_.shift();
            if (!v) throw trap_error(cycle, "shiftout: output column is empty");
            fifo_out_.push_back(*v);
        }
    }

    // Cycle boundary: latches move west.
    void route(const isa::Instruction& op) {
        for (auto& l : column_.in) l = {};
        for (auto& t : tiles_)
            for (auto& b : t.blocks()) b.east_in = {};
        if (op.op == isa::Opcode::AccHop) {
            const unsigned dist = 1u << op.fn;
            for (auto& t : tiles_)
                for (auto& b : t.blocks())
                    if (b.west_out.valid && b.column >= dist) block(b.row, b.column - dist).east_in = b.west_out;
        } else if (op.op == isa::Opcode::ReadOut) {
            for (unsigned lane = 0; lane < cfg_.lanes(); ++lane) column_.in[lane] = block(lane, 0).west_out;
        }
        for (auto& t : tiles_)
            for (auto& b : t.blocks()) b.west_out = {};
    }

    SystemConfig cfg_;
    std::vector<Tile> tiles_;
    OutputColumn column_;
    std::vector<std::int64_t> fifo_out_;
};

} // namespace imagine
