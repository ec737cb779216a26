#include "cmdpm/extended.hpp"

#include "cmdpm/rng.hpp"

namespace cmdpm {

std::vector<ExtendedConstraintRow> extend_polytope(const ActionPolytope& polytope) {
    std::vector<ExtendedConstraintRow> rows;
    rows.reserve(static_cast<std::size_t>(polytope.H.rows()));
    for (Index j = 0; j < polytope.H.rows(); ++j) rows.push_back({polytope.H.row(j), polytope.h[j]});
    return rows;
}

ShapeCheck check_midpoint(const ExtendedReward& ext, Shape expected, Index dim, int samples, std::uint64_t seed) {
    if (dim < 1 || samples < 1) throw InvalidArgument("check_midpoint: dim and samples must be positive");
    CounterRng rng(seed);
    const auto draw = [&] {
        Vector v(dim);
        do {
            for (Index k = 0; k < dim; ++k) v[k] = rng.uniform();
        } while (v.sum() == 0);
        return v;
    };
    ShapeCheck out;
    for (int i = 0; i < samples; ++i) {
        const Vector x = draw(), y = draw();
        const double mid = ext(0.5 * (x + y));
        const double chord = 0.5 * (ext(x) + ext(y));
        const bool concave_ok = mid >= chord - 1e-9;
        const bool convex_ok = mid <= chord + 1e-9;
        const bool ok = expected == Shape::concave ? concave_ok
                        : expected == Shape::convex ? convex_ok
                                                    : concave_ok && convex_ok;
        if (!ok) {
            out.holds = false;
            out.witness.emplace(x, y);
            return out;
        }
    }
    return out;
}

} // namespace cmdpm
