#include "raterlab/preprocess.hpp"

#include <cmath>

#include "raterlab/error.hpp"
#include "raterlab/kernels.hpp"

namespace raterlab {

std::uint64_t positive_count(const Volume& mask) { return kernels::count_nonzero(mask.mask_values()); }

namespace {

template <class T>
std::vector<T> gather(const std::vector<T>& src, const Geometry& in, const Geometry& out,
                      const std::array<std::vector<std::size_t>, 3>& map) {
    std::vector<T> dst(out.voxel_count());
    std::size_t o = 0;
    for (std::size_t z = 0; z < out.nz(); ++z)
        for (std::size_t y = 0; y < out.ny(); ++y)
            for (std::size_t x = 0; x < out.nx(); ++x) dst[o++] = src[in.index(map[0][x], map[1][y], map[2][z])];
    return dst;
}

template <class T>
Volume rebuild(const Volume& like, Geometry g, std::vector<T> values) {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
        return Volume::mask(g, std::move(values));
    } else {
        return like.kind() == VolumeKind::Intensity ? Volume::intensity(g, std::move(values))
                                                     : Volume::probability(g, std::move(values));
    }
}

template <class T>
std::vector<T> values_of(const Volume& v) {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
        auto s = v.mask_values();
        return {s.begin(), s.end()};
    } else {
        auto s = v.prob_values();
        return {s.begin(), s.end()};
    }
}

template <class T>
Volume resample_typed(const Volume& v, std::array<double, 3> target) {
    const Geometry& in = v.geometry();
    std::array<std::size_t, 3> dims{};
    std::array<std::vector<std::size_t>, 3> map;
    for (int a = 0; a < 3; ++a) {
        const double extent = static_cast<double>(in.dims[a]) * in.spacing[a];
        dims[a] = static_cast<std::size_t>(std::max(1.0, std::round(extent / target[a])));
        map[a].resize(dims[a]);
        for (std::size_t o = 0; o < dims[a]; ++o) {
            const double centre = (static_cast<double>(o) + 0.5) * target[a];
            auto src = static_cast<long long>(std::floor(centre / in.spacing[a]));
            src = std::clamp<long long>(src, 0, static_cast<long long>(in.dims[a]) - 1);
            map[a][o] = static_cast<std::size_t>(src);
        }
    }
    const Geometry out(dims, target);
    return rebuild<T>(v, out, gather(values_of<T>(v), in, out, map));
}

template <class T>
Volume crop_typed(const Volume& v, std::array<std::size_t, 2> t) {
    const Geometry& in = v.geometry();
    const Geometry out({t[0], t[1], in.nz()}, in.spacing);
    std::array<std::vector<std::size_t>, 3> map;
    const std::size_t x0 = (in.nx() - t[0]) / 2;
    const std::size_t y0 = (in.ny() - t[1]) / 2;
    for (std::size_t x = 0; x < t[0]; ++x) map[0].push_back(x0 + x);
    for (std::size_t y = 0; y < t[1]; ++y) map[1].push_back(y0 + y);
    for (std::size_t z = 0; z < in.nz(); ++z) map[2].push_back(z);
    return rebuild<T>(v, out, gather(values_of<T>(v), in, out, map));
}

}  // namespace

Volume resample_nn(const Volume& v, std::array<double, 3> target_spacing) {
    for (double s : target_spacing)
        if (!(s > 0.0)) throw Error("resample_nn: target spacing must be > 0");
    if (target_spacing == v.geometry().spacing) return v;
    return v.is_mask() ? resample_typed<std::uint8_t>(v, target_spacing) : resample_typed<float>(v, target_spacing);
}

Volume center_crop(const Volume& v, std::array<std::size_t, 2> target_xy) {
    const Geometry& g = v.geometry();
    if (target_xy[0] < 1 || target_xy[1] < 1) throw Error("center_crop: target dims must be >= 1");
    if (target_xy[0] > g.nx() || target_xy[1] > g.ny())
        throw Error("center_crop: target " + std::to_string(target_xy[0]) + "x" + std::to_string(target_xy[1]) +
                    " exceeds source " + std::to_string(g.nx()) + "x" + std::to_string(g.ny()));
    return v.is_mask() ? crop_typed<std::uint8_t>(v, target_xy) : crop_typed<float>(v, target_xy);
}

std::vector<Volume> slices(const Volume& v) {
    const Geometry& g = v.geometry();
    const Geometry plane({g.nx(), g.ny(), 1}, g.spacing);
    const std::size_t n = g.nx() * g.ny();
    std::vector<Volume> out;
    out.reserve(g.nz());
    for (std::size_t z = 0; z < g.nz(); ++z) {
        if (v.is_mask()) {
            auto s = v.mask_values().subspan(z * n, n);
            out.push_back(Volume::mask(plane, {s.begin(), s.end()}));
        } else {
            auto s = v.prob_values().subspan(z * n, n);
            std::vector<float> vals(s.begin(), s.end());
            out.push_back(v.kind() == VolumeKind::Intensity ? Volume::intensity(plane, std::move(vals))
                                                             : Volume::probability(plane, std::move(vals)));
        }
    }
    return out;
}

Volume stack_slices(const std::vector<Volume>& planes, double z_spacing) {
    if (planes.empty()) throw Error("stack_slices: no planes");
    require_same_geometry(planes, "stack_slices");
    const Geometry& p = planes.front().geometry();
    if (p.nz() != 1) throw Error("stack_slices: planes must be single-slice volumes");
    const Geometry g({p.nx(), p.ny(), planes.size()}, {p.spacing[0], p.spacing[1], z_spacing});
    if (planes.front().is_mask()) {
        std::vector<std::uint8_t> vals;
        vals.reserve(g.voxel_count());
        for (const auto& pl : planes) {
            auto s = pl.mask_values();
            vals.insert(vals.end(), s.begin(), s.end());
        }
        return Volume::mask(g, std::move(vals));
    }
    std::vector<float> vals;
    vals.reserve(g.voxel_count());
    for (const auto& pl : planes) {
        auto s = pl.prob_values();
        vals.insert(vals.end(), s.begin(), s.end());
    }
    return planes.front().kind() == VolumeKind::Intensity ? Volume::intensity(g, std::move(vals))
                                                           : Volume::probability(g, std::move(vals));
}

}  // namespace raterlab
