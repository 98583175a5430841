/**
 * @file  decomposable.hpp
 * @brief Decomposable-system data model: definition checks in distribution
 *        form, class bookkeeping, integral elements, and prolongation.
 */
#ifndef EDS_DECOMPOSABLE_HPP
#define EDS_DECOMPOSABLE_HPP

#include "eds/geometry.hpp"

#include <string>
#include <vector>

namespace eds {

/// Extended class (s, k, l): k = rank F, l = rank G, s = dim - k - l.
struct SystemClass {
    int s = 0;
    int k = 0;
    int l = 0;
    bool operator==(const SystemClass&) const = default;
    std::string print() const;
};

/// A chart with the two characteristic distributions and cached bookkeeping.
class DecomposableSystem {
public:
    DecomposableSystem(ChartPtr chart, Distribution f, Distribution g,
                       std::string name = "");

    const ChartPtr& chart() const { return chart_; }
    const Distribution& f() const { return f_; }
    const Distribution& g() const { return g_; }
    /// V = F (+) G, generated by the union of the generator lists.
    const Distribution& v() const { return v_; }
    SystemClass system_class() const { return cls_; }
    const std::string& name() const { return name_; }

private:
    ChartPtr chart_;
    Distribution f_;
    Distribution g_;
    Distribution v_;
    SystemClass cls_;
    std::string name_;
};

enum class CheckStatus { Ok, Fail, Indeterminate };

const char* check_status_name(CheckStatus s);

/// One verified condition of the decomposability definition.
struct ConditionReport {
    std::string condition;
    CheckStatus status = CheckStatus::Ok;
    std::string detail;
};

struct DecomposableReport {
    CheckStatus status = CheckStatus::Indeterminate;
    SystemClass cls;
    bool no_invariants_of_v = false;
    std::vector<ConditionReport> conditions; ///< all conditions, pass or fail
    std::vector<ConditionReport> failures() const;
};

/// Checks the definition in distribution form: constant ranks, empty
/// intersection (rank(F (+) G) = rank F + rank G), cross-brackets contained
/// in F (+) G pointwise, and no invariants of V.  Unknown verdicts and
/// sampling failures downgrade to Indeterminate naming the condition, never
/// to a silent pass.
DecomposableReport check_decomposable(const ChartPtr& chart, const Distribution& f,
                                      const Distribution& g);
DecomposableReport check_decomposable(const DecomposableSystem& sys);

/// A candidate 2-dimensional integral element at a base point.
struct IntegralElement {
    EvalPoint base;
    std::vector<double> e1;
    std::vector<double> e2;
};

/// True iff span{e1,e2} is 2-dimensional and meets each characteristic
/// distribution in exactly one dimension at the base point (numeric rank
/// tests; degenerate elements report false).
bool is_integral_element(const DecomposableSystem& sys, const IntegralElement& e);

/// Dimension of span(e) ∩ span(rows of d evaluated at e.base); helper for
/// the parametrization isomorphism tests.
int element_intersection_dim(const Distribution& d, const IntegralElement& e);

/// Prolongation on a single affine chart of P(F) x P(G) centered on the
/// F1/G1 directions: new fiber coordinates c_2..c_k, d_2..d_l, with
/// F^ = span{F_1 + sum c_i F_i + (corrections), d/dc_i} and likewise for G.
/// The lead fields carry vertical correction terms built from the frame
/// components of the cross-brackets [F_i, G_j]; they vanish when the chosen
/// frames commute across the decomposition, and they are what keeps the
/// prolonged system decomposable in general.  Requires the generator lists
/// to be frames (count = rank) with F_1, G_1 nonvanishing at the sample
/// points; the class moves from (s,k,l) to (s+(k-1)+(l-1), k, l).
DecomposableSystem prolong(const DecomposableSystem& sys);

} // namespace eds

#endif // EDS_DECOMPOSABLE_HPP
