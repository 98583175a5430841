/**
 * @file  ode.hpp
 * @brief Adaptive ODE integration facade: embedded Runge-Kutta 5(4) pair with
 *        absolute/relative error control.  Callers state tolerances; the
 *        stepping scheme stays behind this interface.
 */
#ifndef EDS_ODE_HPP
#define EDS_ODE_HPP

#include <functional>
#include <stdexcept>
#include <vector>

namespace eds {

/// Step-size underflow, non-finite state, or a singular right-hand side.
struct OdeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OdeOptions {
    double abs_tol = 1e-9;
    double rel_tol = 1e-9;
};

/// dy/dt = rhs(y, t), written into the second argument.
using OdeRhs = std::function<void(const std::vector<double>&, std::vector<double>&, double)>;

/// Integrates y' = rhs(y,t) from t0 to t1 (either direction) with local error
/// per step below the tolerances; returns the final state.  Exceptions from
/// the right-hand side propagate; persistent step rejection throws OdeError.
std::vector<double> integrate_ode(const OdeRhs& rhs, std::vector<double> y0, double t0,
                                  double t1, const OdeOptions& opts = {});

} // namespace eds

#endif // EDS_ODE_HPP
