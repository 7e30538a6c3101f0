#pragma once

#include <span>
#include <vector>

#include "instat/sim/flow.hpp"

namespace instat::sim {

// Active injection segments on the left boundary, in cell rows. The upper
// injector grows upward from the channel centerline, the lower one downward;
// a zero-width row range means the injector is off this step.
struct InjectorState {
    double conc_upper = 0.0;
    double conc_lower = 0.0;
    std::uint32_t upper_begin = 0, upper_end = 0; // row interval [begin, end)
    std::uint32_t lower_begin = 0, lower_end = 0;
};

// Explicit first-order upwind advection with central diffusion on the frozen
// flow. Inflow enters through the left boundary at the injector
// concentration (zero outside active segments), outflow is zero-gradient on
// the right, walls are no-flux. Monotone under the stability bounds checked
// at flow construction, so concentrations stay inside the inlet bounds.
class DyeSolver {
public:
    DyeSolver(const FrozenFlow& flow, double dt, double diffusivity,
              bool closed_right = false);

    void step(std::vector<double>& c, const InjectorState& inj) const;

    double total_mass(std::span<const double> c) const;

    const FrozenFlow& flow() const { return flow_; }

private:
    const FrozenFlow& flow_;
    double dt_;
    double diffusivity_;
    bool closed_right_;
    mutable std::vector<double> scratch_;
};

} // namespace instat::sim
