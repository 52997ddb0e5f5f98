#include "raterlab/morphology.hpp"

#include <vector>

#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"

namespace raterlab::morph {

namespace {

using Bytes = std::vector<std::uint8_t>;
using Combine = void (*)(std::uint8_t*, const std::uint8_t*, std::size_t);

// dst op= src shifted by +-1 along every non-degenerate axis. For erosion the
// voxels whose neighbour falls outside the grid are cleared afterwards.
void step(const Geometry& g, const Bytes& src, Bytes& dst, Combine op, bool clear_border) {
    const std::size_t nx = g.nx(), ny = g.ny(), nz = g.nz();
    const std::size_t n = src.size();
    dst = src;
    if (nx > 1) {
        for (std::size_t row = 0; row < ny * nz; ++row) {
            std::uint8_t* d = dst.data() + row * nx;
            const std::uint8_t* s = src.data() + row * nx;
            op(d + 1, s, nx - 1);
            op(d, s + 1, nx - 1);
        }
    }
    // y shifts stay inside their slice; a z shift never wraps.
    if (ny > 1) {
        const std::size_t plane = nx * ny;
        for (std::size_t z = 0; z < nz; ++z) {
            std::uint8_t* d = dst.data() + z * plane;
            const std::uint8_t* s = src.data() + z * plane;
            op(d + nx, s, plane - nx);
            op(d, s + nx, plane - nx);
        }
    }
    if (nz > 1) {
        const std::size_t st = nx * ny;
        op(dst.data() + st, src.data(), n - st);
        op(dst.data(), src.data() + st, n - st);
    }
    if (!clear_border) return;
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const bool edge = (nx > 1 && (x == 0 || x == nx - 1)) || (ny > 1 && (y == 0 || y == ny - 1)) ||
                                  (nz > 1 && (z == 0 || z == nz - 1));
                if (edge) dst[g.index(x, y, z)] = 0;
            }
}

Bytes copy_of(const Volume& v) {
    auto s = v.mask_values();
    return {s.begin(), s.end()};
}

}  // namespace

Volume dilate(const Volume& mask, int steps) {
    if (steps < 0) throw Error("dilate: negative step count");
    const auto& k = kernels::active();
    Bytes cur = copy_of(mask), next;
    for (int i = 0; i < steps; ++i) {
        step(mask.geometry(), cur, next, k.or_into, false);
        cur.swap(next);
    }
    return Volume::mask(mask.geometry(), std::move(cur));
}

Volume erode(const Volume& mask, int steps) {
    if (steps < 0) throw Error("erode: negative step count");
    const auto& k = kernels::active();
    Bytes cur = copy_of(mask), next;
    for (int i = 0; i < steps; ++i) {
        step(mask.geometry(), cur, next, k.and_into, true);
        cur.swap(next);
    }
    return Volume::mask(mask.geometry(), std::move(cur));
}

Volume dilate_or_erode_clamped(const Volume& mask, int steps, int* applied) {
    if (steps >= 0) {
        if (applied) *applied = steps;
        return dilate(mask, steps);
    }
    const auto& k = kernels::active();
    Bytes cur = copy_of(mask), next;
    int done = 0;
    for (; done < -steps; ++done) {
        step(mask.geometry(), cur, next, k.and_into, true);
        if (k.count_nonzero(next.data(), next.size()) == 0) break;
        cur.swap(next);
    }
    if (applied) *applied = -done;
    return Volume::mask(mask.geometry(), std::move(cur));
}

Volume inner_boundary(const Volume& mask) {
    const Volume core = erode(mask, 1);
    auto m = mask.mask_values();
    auto c = core.mask_values();
    Bytes out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] & static_cast<std::uint8_t>(!c[i]);
    return Volume::mask(mask.geometry(), std::move(out));
}

Volume outer_boundary(const Volume& mask) {
    const Volume grown = dilate(mask, 1);
    auto m = mask.mask_values();
    auto d = grown.mask_values();
    Bytes out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = d[i] & static_cast<std::uint8_t>(!m[i]);
    return Volume::mask(mask.geometry(), std::move(out));
}

}  // namespace raterlab::morph
