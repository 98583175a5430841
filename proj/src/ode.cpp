/**
 * @file  ode.cpp
 */
#include "eds/ode.hpp"

#include <boost/numeric/odeint.hpp>

#include <cmath>

namespace eds {

namespace odeint = boost::numeric::odeint;

std::vector<double> integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0,
                                  double t1, const OdeOptions& opts) {
    using state_type = std::vector<double>;
    if (t1 == t0 || y0.empty()) {
        return y0;
    }
    const double span = t1 - t0;
    const double dt0 = std::copysign(std::min(std::abs(span), 1e-3), span);
    auto stepper = odeint::make_controlled<odeint::runge_kutta_dopri5<state_type>>(
        opts.abs_tol, opts.rel_tol);
    auto system = [&rhs](const state_type& y, state_type& dydt, double t) { rhs(y, dydt, t); };
    try {
        odeint::integrate_adaptive(stepper, system, y0, t0, t1, dt0);
    } catch (const odeint::step_adjustment_error& ex) {
        throw OdeError(std::string("step-size control failed: ") + ex.what());
    }
    for (const double v : y0) {
        if (!std::isfinite(v)) {
            throw OdeError("integration produced a non-finite state");
        }
    }
    return y0;
}

} // namespace eds
