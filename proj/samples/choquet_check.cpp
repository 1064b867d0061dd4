// Randomized strong subadditivity check on a small grid, printed as JSON.

#include "relcap/relcap.hpp"

#include <iostream>

int main(int argc, char** argv) {
    using namespace relcap;
    const std::uint64_t seed = argc > 1 ? std::stoull(argv[1]) : 1;
    auto omega = build_domain(unit_square_spec(0.125));
    const auto report = check_strong_subadditivity(omega, PExponent(3.0), 20, seed);
    std::cout << dump(to_json(report));
    return report.passed() ? 0 : 1;
}
