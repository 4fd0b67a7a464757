#pragma once

// GEMV tile: FSM controller (single-cycle / multicycle driver), Op-Params
// store and a block_rows x block_cols array of PIM blocks. Controller
// pipeline stages and the intra-tile fanout tree only add issue latency,
// which the system folds into its fanout delay.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "imagine/assembler.hpp"
#include "imagine/errors.hpp"
#include "imagine/isa.hpp"
#include "imagine/params.hpp"
#include "imagine/pimcore.hpp"

namespace imagine {

struct TileConfig {
    unsigned block_rows = 12;
    unsigned block_cols = 2;
    bool stage_a = true;
    bool stage_b = false;
    bool stage_c = false;
    unsigned fanout_levels = 2;
    unsigned fanout_degree = 4;
    unsigned d_alu = 2;

    unsigned enabled_stages() const noexcept { return unsigned{stage_a} + unsigned{stage_b} + unsigned{stage_c}; }
    unsigned issue_latency() const noexcept { return enabled_stages() + fanout_levels; }

    void validate() const {
        if (block_rows < 1 || block_cols < 1) throw config_error("tile: block_rows and block_cols must be >= 1");
        if (fanout_degree < 1) throw config_error("tile: fanout_degree must be >= 1");
    }
};

enum class Driver { Single, Multi };

struct Trap {
    std::uint64_t cycle = 0;
    std::string message;
};

struct ControllerState {
    Driver driver = Driver::Single;
    unsigned busy_cycles_remaining = 0;
    OpParams params;
    bool params_loaded = false;
    isa::Instruction current;
    unsigned cursor = 0;

    bool idle() const noexcept { return busy_cycles_remaining == 0; }
};

class Tile {
public:
    Tile() : Tile(TileConfig{}) {}

    // grid_cols: total block columns of the whole system, for block ids.
    explicit Tile(const TileConfig& cfg, unsigned tile_row = 0, unsigned tile_col = 0, unsigned grid_cols = 0)
        : cfg_(cfg), tile_row_(tile_row), tile_col_(tile_col) {
        cfg_.validate();
        if (grid_cols == 0) grid_cols = cfg_.block_cols;
        blocks_.reserve(std::size_t{cfg_.block_rows} * cfg_.block_cols);
        for (unsigned r = 0; r < cfg_.block_rows; ++r) {
            for (unsigned c = 0; c < cfg_.block_cols; ++c) {
                const unsigned gr = tile_row * cfg_.block_rows + r;
                const unsigned gc = tile_col * cfg_.block_cols + c;
                blocks_.emplace_back(gr * grid_cols + gc, gr, gc);
            }
        }
    }

    const TileConfig& config() const noexcept { return cfg_; }
    const ControllerState& controller() const noexcept { return ctl_; }
    std::uint64_t cycles() const noexcept { return cycles_; }
    const std::optional<Trap>& trap() const noexcept { return trap_; }

    pim::PimBlock& block(unsigned r, unsigned c) { return blocks_.at(std::size_t{r} * cfg_.block_cols + c); }
    const pim::PimBlock& block(unsigned r, unsigned c) const {
        return blocks_.at(std::size_t{r} * cfg_.block_cols + c);
    }
    std::vector<pim::PimBlock>& blocks() noexcept { return blocks_; }
    const std::vector<pim::PimBlock>& blocks() const noexcept { return blocks_; }

    // Clears controller state and traps; register files are kept.
    void reset_control() {
        ctl_ = ControllerState{};
        trap_.reset();
        for (auto& b : blocks_) b.selected = true;
    }

    // Accepts an instruction when the controller is idle. Cost zero (HALT)
    // leaves the controller idle.
    bool issue(const isa::Instruction& in) {
        if (!ctl_.idle() || trap_) return false;
        if (auto why = check(in)) {
            trap_ = Trap{cycles_, *why + " [" + isa::disassemble(in) + "]"};
            return true;
        }
        if (in.op == isa::Opcode::SetParams) {
            ctl_.params = params_from(in);
            ctl_.params_loaded = true;
        }
        ctl_.current = in;
        ctl_.cursor = 0;
        ctl_.busy_cycles_remaining = pim::op_cycles(in, ctl_.params, cfg_.d_alu);
        ctl_.driver = isa::is_single_cycle(in.op) ? Driver::Single : Driver::Multi;
        return true;
    }

    // One clock: the controller emits micro-cycle `cursor` of the instruction
    // in flight to every block.
    void cycle() {
        ++cycles_;
        if (ctl_.idle() || trap_) return;
        const pim::MicroOp op{ctl_.current, ctl_.params, ctl_.cursor};
        try {
            for (auto& b : blocks_) {
                b.regfile.begin_cycle();
                b.step(op);
            }
        } catch (const error& e) {
            trap_ = Trap{cycles_ - 1, std::string(e.what()) + " [" + isa::disassemble(ctl_.current) + "]"};
            ctl_.busy_cycles_remaining = 0;
            return;
        }
        ++ctl_.cursor;
        if (--ctl_.busy_cycles_remaining == 0) ctl_.driver = Driver::Single;
    }

    std::string state_string() const {
        if (trap_) return "TRAP";
        if (ctl_.idle()) return "IDLE";
        return ctl_.driver == Driver::Multi ? "MULTI" : "SINGLE";
    }

private:
    std::optional<std::string> check(const isa::Instruction& in) const {
        using isa::Opcode;
        if (in.op == Opcode::SetParams) {
            const auto p = params_from(in);
            if (p.acc_width == 0 || p.acc_width > kMaxAccWidth)
                return "setp: accumulator width " + std::to_string(p.acc_width) + " unsupported";
            return std::nullopt;
        }
        if (isa::is_multicycle(in.op) && !ctl_.params_loaded) return "multicycle instruction before setp";
        if (in.op == Opcode::Mult && !ctl_.params.is_signed) return "mult: unsigned operands are not supported";
        if (in.op == Opcode::AccBlk && in.fn >= 4) return "accblk: invalid stage " + std::to_string(in.fn);
        if (in.op == Opcode::AccHop && in.fn >= 16) return "acchop: invalid level " + std::to_string(in.fn);
        return std::nullopt;
    }

    TileConfig cfg_;
    unsigned tile_row_ = 0;
    unsigned tile_col_ = 0;
    std::vector<pim::PimBlock> blocks_;
    ControllerState ctl_;
    std::optional<Trap> trap_;
    std::uint64_t cycles_ = 0;
};

// Cascade at a cycle boundary: the west_out latch of each block row's
// westmost block in `east` feeds the east_in latch of the easternmost block
// in `west`.
inline void east_west_exchange(Tile& west, Tile& east) {
    if (west.config().block_rows != east.config().block_rows)
        throw config_error("east_west_exchange: tiles have different block_rows");
    const unsigned last = west.config().block_cols - 1;
    for (unsigned r = 0; r < west.config().block_rows; ++r) {
        west.block(r, last).east_in = east.block(r, 0).west_out;
        east.block(r, 0).west_out = {};
    }
}

} // namespace imagine
