// Capacity, extremal and capacitary measure of a disc in the unit square.

#include "relcap/relcap.hpp"

#include <cstdio>

int main() {
    using namespace relcap;
    auto omega = build_domain(unit_square_spec(1.0 / 32));
    const NodeSet disc = node_set(omega, select::Ball{{0.5, 0.5}, 0.2});
    SolverOptions opts;
    opts.tolerance = 1e-9;

    for (double p : {1.5, 2.0, 3.0}) {
        const PExponent pe(p);
        const auto cm = capacitary_measure(omega, disc, pe, opts);
        const double e = energy(omega, cm.mu, pe, opts);
        std::printf("p=%.1f  Cap=%.10f  mu(A)=%.10f  E(mu)=%.10f  iterations=%d\n", p, cm.cap.value,
                    cm.mu.mass_of(disc), e, cm.cap.iterations);
    }
}
