// Plans a GEMV on the default tile, runs it and checks the result.

#include <iostream>

#include "imagine/imagine.hpp"

int main() {
    using namespace imagine;
    const SystemConfig cfg;
    const GemvProblem prob{24, 40, 8, true};
    const auto inst = random_instance(prob, kDefaultSeed);

    const auto p = plan(prob, cfg);
    std::cout << to_json(p).dump(2) << '\n';

    System sys(cfg);
    load_matrix(sys, inst.a, p);
    load_vector(sys, inst.x, p);
    const auto report = sys.run(codegen(p));

    const bool ok = sys.fifo_out() == reference_gemv(inst.a, inst.x);
    std::cout << "cycles " << report.cycles.total << " predicted " << p.predicted_cycles << ' '
              << (ok ? "ok" : "MISMATCH") << '\n';
    return ok && report.cycles.total == p.predicted_cycles ? 0 : 1;
}
