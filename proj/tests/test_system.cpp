#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "imagine/kernel.hpp"
#include "imagine/system.hpp"

using namespace imagine;

namespace {

isa::Program prog(std::initializer_list<isa::Instruction> ins) {
    isa::Program p;
    p.code = ins;
    return p;
}

SystemConfig row_of_columns(unsigned cols, unsigned slice = 1) {
    SystemConfig c;
    c.tile.block_rows = 1;
    c.tile.block_cols = 1;
    c.tile_cols = cols;
    c.slice = slice;
    return c;
}

// Levels a binary-hopping schedule needs until column 0 holds every value.
unsigned brute_force_levels(unsigned cols) {
    std::vector<std::vector<bool>> has(cols, std::vector<bool>(cols, false));
    for (unsigned c = 0; c < cols; ++c) has[c][c] = true;
    auto done = [&] { return std::all_of(has[0].begin(), has[0].end(), [](bool b) { return b; }); };
    unsigned levels = 0;
    while (!done()) {
        const unsigned d = 1u << levels;
        for (unsigned c = 0; c + d < cols; c += 2 * d)
            for (unsigned k = 0; k < cols; ++k)
                if (has[c + d][k]) has[c][k] = true;
        ++levels;
    }
    return levels;
}

} // namespace

TEST(System, NopHaltCostsFanoutPlusOne) {
    SystemConfig cfg;
    EXPECT_EQ(cfg.fanout_latency(), 4u);
    System sys(cfg);
    const auto rep = sys.run(prog({isa::nop(), isa::halt()}));
    EXPECT_EQ(rep.cycles.total, cfg.fanout_latency() + 1);
    EXPECT_EQ(rep.cycles.fanout, cfg.fanout_latency());
    EXPECT_EQ(rep.cycles.compute, 1u);
    EXPECT_EQ(rep.histogram.at("nop"), 1u);
    EXPECT_EQ(rep.histogram.count("halt"), 0u);

    SystemConfig zero;
    zero.global_fanout_levels = 0;
    zero.tile.fanout_levels = 0;
    zero.tile.stage_a = false;
    EXPECT_EQ(System(zero).run(prog({isa::nop(), isa::halt()})).cycles.total, 1u);
}

TEST(System, TotalIsFanoutPlusInstructionCosts) {
    SystemConfig cfg;
    System sys(cfg);
    OpParams p;
    const auto program = prog({set_params(p), isa::set_ptr(896), isa::mult(0, 512), isa::add(768, 896, 3),
                               isa::acc_blk(0, 768, 768), isa::acc_hop(0, 768, 768), isa::read_out(768),
                               isa::shift_out(), isa::halt()});
    std::uint64_t sum = cfg.fanout_latency();
    OpParams cur;
    for (const auto& in : program.code) {
        if (in.op == isa::Opcode::SetParams) cur = params_from(in);
        sum += pim::op_cycles(in, cur, cfg.tile.d_alu);
    }
    const auto rep = sys.run(program);
    EXPECT_EQ(rep.cycles.total, sum);
    EXPECT_EQ(rep.cycles.fanout + rep.cycles.compute + rep.cycles.reduce_block + rep.cycles.reduce_hop +
                  rep.cycles.readout,
              rep.cycles.total);
    EXPECT_EQ(rep.cycles.reduce_hop, 1u + 16 + 2);
}

TEST(System, DeterministicRunsAndTraces) {
    const SystemConfig cfg;
    const GemvProblem prob{20, 30, 8, true};
    const auto inst = random_instance(prob, 5);
    std::ostringstream t1, t2;
    const auto r1 = run_gemv(cfg, prob, inst, &t1);
    const auto r2 = run_gemv(cfg, prob, inst, &t2);
    EXPECT_EQ(r1.report, r2.report);
    EXPECT_EQ(r1.y, r2.y);
    EXPECT_EQ(t1.str(), t2.str());
    EXPECT_FALSE(t1.str().empty());
    EXPECT_NE(t1.str().find("cycle 0 IDLE"), std::string::npos);
    EXPECT_NE(t1.str().find("MULTI mult"), std::string::npos);
}

TEST(System, IdentityMatrixReturnsX) {
    const SystemConfig cfg;
    const GemvProblem prob{8, 8, 8, true};
    GemvInstance inst{Matrix(8, 8), {5, -3, 127, -128, 0, 1, -1, 42}};
    for (unsigned i = 0; i < 8; ++i) inst.a.at(i, i) = 1;
    EXPECT_EQ(run_gemv(cfg, prob, inst).y, inst.x);
}

TEST(System, HopLevelsMatchBruteForceForWidthsOneToThirtyTwo) {
    std::mt19937_64 rng(12);
    for (unsigned cols = 1; cols <= 32; ++cols) {
        const auto cfg = row_of_columns(cols);
        EXPECT_EQ(cfg.hop_levels(), brute_force_levels(cols)) << cols;
        System sys(cfg);
        const unsigned wacc = 20;
        std::int64_t sum = 0;
        for (unsigned c = 0; c < cols; ++c) {
            const auto v = static_cast<std::int64_t>(rng() % 20001) - 10000;
            sum += v;
            pim::store_value(sys.block(0, c).regfile, 768, wacc, 0, v);
        }
        const auto cycles = sys.accumulate_hops(768, wacc);
        EXPECT_EQ(cycles, std::uint64_t{brute_force_levels(cols)} * (1 + wacc + 2)) << cols;
        EXPECT_EQ(pim::load_value(sys.block(0, 0).regfile, 768, wacc, 0), sum) << cols;
    }
}

TEST(System, FourColumnsReduceToTen) {
    System sys(row_of_columns(4));
    for (unsigned c = 0; c < 4; ++c) pim::store_value(sys.block(0, c).regfile, 768, 8, 0, c + 1);
    EXPECT_EQ(sys.accumulate_hops(768, 8), 2u * (1 + 8 + 2));
    EXPECT_EQ(pim::load_value(sys.block(0, 0).regfile, 768, 8, 0), 10);
}

TEST(System, OneColumnNeedsNoHops) {
    System sys(row_of_columns(1));
    EXPECT_EQ(sys.accumulate_hops(768, 16), 0u);
}

TEST(System, HopSumIsModular) {
    System sys(row_of_columns(2));
    pim::store_value(sys.block(0, 0).regfile, 768, 8, 0, 100);
    pim::store_value(sys.block(0, 1).regfile, 768, 8, 0, 100);
    sys.accumulate_hops(768, 8);
    EXPECT_EQ(pim::load_value(sys.block(0, 0).regfile, 768, 8, 0), 200 - 256);
}

TEST(System, SliceFourQuartersStreamBeats) {
    for (unsigned wacc : {8u, 16u, 32u, 64u}) {
        System s1(row_of_columns(8, 1)), s4(row_of_columns(8, 4));
        const auto c1 = s1.accumulate_hops(768, wacc), c4 = s4.accumulate_hops(768, wacc);
        EXPECT_EQ(c1 / 3 - 3, wacc);
        EXPECT_EQ(c4 / 3 - 3, wacc / 4);
    }
    // same sums either way
    System a(row_of_columns(5, 1)), b(row_of_columns(5, 4));
    for (unsigned c = 0; c < 5; ++c) {
        pim::store_value(a.block(0, c).regfile, 768, 22, 0, -1000 * static_cast<int>(c) + 7);
        pim::store_value(b.block(0, c).regfile, 768, 22, 0, -1000 * static_cast<int>(c) + 7);
    }
    a.accumulate_hops(768, 22);
    b.accumulate_hops(768, 22);
    EXPECT_EQ(pim::load_value(a.block(0, 0).regfile, 768, 22, 0), pim::load_value(b.block(0, 0).regfile, 768, 22, 0));
}

TEST(System, ReadOutputShiftsOnePerCycle) {
    SystemConfig cfg;
    System sys(cfg);
    for (unsigned lane = 0; lane < cfg.lanes(); ++lane)
        pim::store_value(sys.block(lane, 0).regfile, 768, 16, 0, 100 * static_cast<int>(lane) - 500);
    OpParams p;
    sys.run(prog({set_params(p), isa::read_out(768), isa::halt()}));
    LatencyReport rep;
    const auto y = sys.read_output(cfg.lanes(), &rep);
    ASSERT_EQ(y.size(), cfg.lanes());
    for (unsigned lane = 0; lane < cfg.lanes(); ++lane) EXPECT_EQ(y[lane], 100 * static_cast<int>(lane) - 500);
    EXPECT_EQ(rep.cycles.readout, cfg.lanes());

    EXPECT_TRUE(sys.read_output(0, &rep).empty());
    EXPECT_EQ(rep.cycles.readout, 0u);
    EXPECT_THROW(sys.read_output(cfg.lanes() + 1), range_error);
}

TEST(System, ShiftOutOfEmptyColumnTraps) {
    System sys;
    EXPECT_THROW(sys.run(prog({isa::shift_out(), isa::halt()})), trap_error);
}

TEST(System, UnsignedMultTraps) {
    System sys;
    OpParams p;
    p.is_signed = false;
    EXPECT_THROW(sys.run(prog({set_params(p), isa::mult(0, 64), isa::halt()})), trap_error);
}

TEST(System, TimeoutGuard) {
    SystemConfig cfg;
    cfg.max_cycles = 50;
    System sys(cfg);
    isa::Program p;
    p.code.assign(100, isa::nop());
    p.code.push_back(isa::halt());
    EXPECT_THROW(sys.run(p), timeout_error);
}

TEST(System, PipelineStagesOnlyAddLatency) {
    const GemvProblem prob{30, 50, 8, true};
    const auto inst = random_instance(prob, 77);
    SystemConfig base;
    base.tile.stage_a = base.tile.stage_b = base.tile.stage_c = false;
    const auto ref = run_gemv(base, prob, inst);
    System ref_sys(base);
    {
        const auto p = plan(prob, base);
        load_matrix(ref_sys, inst.a, p);
        load_vector(ref_sys, inst.x, p);
        ref_sys.run(codegen(p));
    }
    for (unsigned mask = 0; mask < 8; ++mask) {
        SystemConfig cfg = base;
        cfg.tile.stage_a = mask & 1;
        cfg.tile.stage_b = mask & 2;
        cfg.tile.stage_c = mask & 4;
        const auto p = plan(prob, cfg);
        System sys(cfg);
        load_matrix(sys, inst.a, p);
        load_vector(sys, inst.x, p);
        const auto rep = sys.run(codegen(p));
        EXPECT_EQ(sys.fifo_out(), ref.y);
        EXPECT_EQ(rep.cycles.total - ref.report.cycles.total, static_cast<unsigned>(std::popcount(mask)));
        for (unsigned r = 0; r < cfg.lanes(); ++r)
            for (unsigned c = 0; c < cfg.block_cols(); ++c)
                EXPECT_TRUE(sys.block(r, c).same_state(ref_sys.block(r, c)));
    }
}

TEST(System, GridInvariance) {
    SystemConfig wide, tall;
    wide.tile_cols = 2;
    tall.tile_rows = 2;
    EXPECT_EQ(wide.total_blocks(), tall.total_blocks());
    for (auto prob : {GemvProblem{40, 64, 8, true}, GemvProblem{7, 100, 4, true}, GemvProblem{64, 3, 16, true}}) {
        const auto inst = random_instance(prob, 3);
        const auto a = run_gemv(wide, prob, inst), b = run_gemv(tall, prob, inst);
        EXPECT_EQ(a.y, b.y);
        EXPECT_EQ(a.y, reference_gemv(inst.a, inst.x));
    }
}

TEST(System, LoadChecksRange) {
    const SystemConfig cfg;
    const GemvProblem prob{2, 2, 8, true};
    const auto p = plan(prob, cfg);
    System sys(cfg);
    Matrix a(2, 2);
    a.at(0, 0) = 127;
    EXPECT_NO_THROW(load_matrix(sys, a, p));
    EXPECT_EQ(pim::dump(sys.block(0, 0).regfile, 0, 8), "0001\n0001\n0001\n0001\n0001\n0001\n0001\n0000\n");
    a.at(1, 0) = 128;
    try {
        load_matrix(sys, a, p);
        FAIL();
    } catch (const load_error& e) {
        EXPECT_NE(std::string(e.what()).find("A[1][0]"), std::string::npos);
    }
    EXPECT_THROW(load_vector(sys, {1, -129}, p), load_error);
    EXPECT_THROW(load_vector(sys, {1}, p), load_error);
}

TEST(System, LoadDumpRoundTrip) {
    const SystemConfig cfg;
    const GemvProblem prob{24, 64, 16, true};
    const auto inst = random_instance(prob, 8);
    const auto p = plan(prob, cfg);
    System sys(cfg);
    load_matrix(sys, inst.a, p);
    for (unsigned r = 0; r < prob.m; ++r)
        for (unsigned c = 0; c < prob.n; ++c) {
            const unsigned lane = r % p.lanes, f = r / p.lanes, g = c / p.cols_per_pe, k = c % p.cols_per_pe;
            const auto& rf = sys.block(lane, g / 16).regfile;
            ASSERT_EQ(pim::load_value(rf, p.a_row(f, k), 16, g % 16), inst.a.at(r, c));
        }
}

TEST(System, ConfigJson) {
    SystemConfig c;
    c.tile_rows = 3;
    c.tile.stage_b = true;
    c.clock_mhz = 500;
    c.slice = 4;
    const auto back = config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_EQ(back.fanout_latency(), 5u);

    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"tile_rows": 1, "colour": 3})")), config_error);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"clock_mhz": 0})")), config_error);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"slice": 2})")), config_error);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"block_rows": 0})")), config_error);
    EXPECT_THROW(config_from_json(nlohmann::json::parse(R"({"tile_rows": -1})")), config_error);
    EXPECT_THROW(config_from_json(nlohmann::json::parse("[1]")), config_error);
    EXPECT_THROW(load_config("/nonexistent/cfg.json"), config_error);

    for (const char* name : {"default.json", "grid4x2.json", "u55.json"})
        EXPECT_NO_THROW(load_config(std::string(IMAGINE_SAMPLES_DIR) + "/configs/" + name)) << name;
    const auto u55 = load_config(std::string(IMAGINE_SAMPLES_DIR) + "/configs/u55.json");
    EXPECT_EQ(u55.tile_rows * u55.tile_cols, 168u);
    EXPECT_EQ(u55.total_pes(), 64512u);
}

TEST(System, StatsJson) {
    System sys;
    const auto rep = sys.run(prog({isa::nop(), isa::nop(), isa::halt()}));
    const auto j = to_json(rep);
    EXPECT_EQ(j["cycles"]["total"], 6);
    EXPECT_EQ(j["cycles"]["fanout"], 4);
    EXPECT_EQ(j["instructions"]["nop"], 2);
    EXPECT_EQ(j["clock_mhz"], 737.0);
    EXPECT_DOUBLE_EQ(j["seconds"].get<double>(), 6 / 737e6);
}
