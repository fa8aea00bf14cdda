#pragma once

#include "hcl/graph.hpp"
#include "hcl/measurement.hpp"
#include "hcl/problem.hpp"

#include <initializer_list>
#include <vector>

namespace hcl::test {

inline Vec v2(double a, double b)
{
    Vec v(2);
    v << a, b;
    return v;
}

inline Vec v3(double a, double b, double c)
{
    Vec v(3);
    v << a, b, c;
    return v;
}

/// Noise small enough that synthesized data equals the geometry to ~1e-9.
inline NoiseParams noiseless()
{
    return NoiseParams::uniform(1e-12, 1e12, 1e-12, 1e12);
}

/// One-tick window without velocities.
inline MeasurementWindow single_window(const NetworkSnapshot& snap, const Dataset& data)
{
    std::vector<NetworkSnapshot> s{snap};
    std::vector<Dataset> d{data};
    return make_window(s, d);
}

} // namespace hcl::test
