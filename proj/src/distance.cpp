#include "raterlab/distance.hpp"

#include <limits>

namespace raterlab {

namespace {

// 1D squared-distance transform with weight w per unit step (lower envelope
// of parabolas), applied in place on a strided line.
void edt_line(double* f, std::size_t n, std::size_t stride, double w, std::vector<double>& buf,
              std::vector<std::size_t>& site, std::vector<double>& bound) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    buf.resize(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = f[i * stride];
    site.clear();
    bound.clear();
    for (std::size_t q = 0; q < n; ++q) {
        if (buf[q] == inf) continue;
        const double fq = buf[q] + w * static_cast<double>(q) * static_cast<double>(q);
        while (!site.empty()) {
            const std::size_t v = site.back();
            const double fv = buf[v] + w * static_cast<double>(v) * static_cast<double>(v);
            const double s = (fq - fv) / (2.0 * w * static_cast<double>(q - v));
            if (s <= bound.back()) {
                site.pop_back();
                bound.pop_back();
            } else {
                bound.push_back(s);
                break;
            }
        }
        if (site.empty()) bound.assign(1, -inf);
        site.push_back(q);
    }
    if (site.empty()) return;
    bound.push_back(inf);
    std::size_t k = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const double x = static_cast<double>(p);
        while (bound[k + 1] < x) ++k;
        const double d = x - static_cast<double>(site[k]);
        f[p * stride] = w * d * d + buf[site[k]];
    }
}

}  // namespace

std::vector<double> squared_distance_map(const Geometry& g, const std::vector<std::size_t>& features) {
    std::vector<double> f(g.voxel_count(), std::numeric_limits<double>::infinity());
    for (auto i : features) f[i] = 0.0;
    std::vector<double> buf, bound;
    std::vector<std::size_t> site;
    const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            edt_line(f.data() + g.index(0, y, z), nx, 1, g.spacing[0] * g.spacing[0], buf, site, bound);
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t x = 0; x < nx; ++x)
            edt_line(f.data() + g.index(x, 0, z), ny, nx, g.spacing[1] * g.spacing[1], buf, site, bound);
    for (std::size_t y = 0; y < ny; ++y)
        for (std::size_t x = 0; x < nx; ++x)
            edt_line(f.data() + g.index(x, y, 0), nz, nx * ny, g.spacing[2] * g.spacing[2], buf, site, bound);
    return f;
}

}  // namespace raterlab
