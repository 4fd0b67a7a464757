// Ideal TOPS scaling over the bundled device table.

#include <iostream>

#include "imagine/perfmodel.hpp"

int main() {
    using namespace imagine::perf;
    const auto db = load_database(default_db_path());
    const double mac = static_cast<double>(microcode_mac_cycles());
    for (const auto& pt : ideal_scaling_curve(db.devices, kImagineClockMhz, mac))
        std::cout << pt.id << ' ' << pt.bram_count << ' ' << format_k(max_pe(pt.bram_count)) << ' ' << pt.tops << '\n';
}
