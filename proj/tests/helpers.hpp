#pragma once

#include "furst/linalg.hpp"
#include "furst/rng.hpp"

#include <cmath>

namespace testutil {

// Gaussian matrix rescaled to determinant one.
inline furst::Matrix random_sl(int d, furst::Stream& s) {
    for (;;) {
        furst::Matrix m(d);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) m(r, c) = s.normal();
        double det = m.determinant();
        if (std::abs(det) < 1e-3) continue;
        if (det < 0) {
            for (int c = 0; c < d; ++c) m(0, c) = -m(0, c);
            det = -det;
        }
        m *= std::pow(det, -1.0 / d);
        return m;
    }
}

inline furst::Vector random_unit(int d, furst::Stream& s) {
    furst::Vector v(d);
    for (int i = 0; i < d; ++i) v[i] = s.normal();
    return v.normalized();
}

// Jacobian of x -> Ax/|Ax| on the sphere by central differences in an orthonormal
// tangent frame; independent of the closed form |Ax|^-d.
inline double numeric_jacobian(const furst::Matrix& a, const furst::Vector& x) {
    const int d = x.dim();
    // Tangent basis at x: Gram-Schmidt of e_i against x.
    std::vector<furst::Vector> tangent;
    for (int i = 0; i < d && static_cast<int>(tangent.size()) < d - 1; ++i) {
        furst::Vector e = furst::Vector::basis(d, i);
        e -= e.dot(x) * x;
        for (const auto& t : tangent) e -= e.dot(t) * t;
        if (e.norm() > 1e-6) tangent.push_back(e.normalized());
    }
    auto g = [&](const furst::Vector& v) { return (a * v.normalized()).normalized(); };
    const double h = 1e-6;
    std::vector<furst::Vector> cols;
    for (const auto& t : tangent) {
        furst::Vector dp = g(x + h * t) - g(x - h * t);
        dp *= 1.0 / (2.0 * h);
        cols.push_back(dp);
    }
    // |det| of the (d-1)-frame = sqrt(det Gram).
    const int     k = d - 1;
    furst::Matrix gram(d);
    for (int i = 0; i < d; ++i) gram(i, i) = 1.0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) gram(i, j) = cols[static_cast<std::size_t>(i)].dot(cols[static_cast<std::size_t>(j)]);
    return std::sqrt(gram.determinant());
}

}  // namespace testutil
