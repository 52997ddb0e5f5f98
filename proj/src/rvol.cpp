#include "raterlab/rvol.hpp"

#include <bit>
#include <cstring>
#include "json.hpp"
#include <string>

#include "raterlab/error.hpp"
#include "raterlab/io.hpp"

namespace raterlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* kind_name(VolumeKind k) {
    switch (k) {
        case VolumeKind::BinaryMask:
            return "mask";
        case VolumeKind::ProbabilityMap:
            return "prob";
        case VolumeKind::Intensity:
            return "image";
    }
    return "?";
}

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
    return v;
}

fs::path raw_path_for(const fs::path& header) {
    fs::path raw = header;
    raw.replace_extension(".raw");
    return raw;
}

}  // namespace

Volume load_volume(const fs::path& header_path) {
    if (!fs::exists(header_path)) throw IoError("missing volume header: " + header_path.string());
    json h;
    try {
        h = json::parse(read_file(header_path));
    } catch (const json::exception& e) {
        throw IoError("malformed RVOL header " + header_path.string() + ": " + e.what());
    }
    try {
        const auto dims = h.at("dims").get<std::array<long long, 3>>();
        const auto spacing = h.at("spacing_mm").get<std::array<double, 3>>();
        const auto dtype = h.at("dtype").get<std::string>();
        const auto kind = h.at("kind").get<std::string>();
        for (long long d : dims)
            if (d < 1) throw IoError("RVOL " + header_path.string() + ": dims must be >= 1");
        const Geometry g({static_cast<std::size_t>(dims[0]), static_cast<std::size_t>(dims[1]),
                          static_cast<std::size_t>(dims[2])},
                         spacing);

        fs::path raw = h.contains("data") ? header_path.parent_path() / h.at("data").get<std::string>()
                                          : raw_path_for(header_path);
        if (!fs::exists(raw)) throw IoError("missing raw voxel file: " + raw.string());
        const std::string bytes = read_file(raw);

        if (dtype == "u8") {
            if (kind != "mask") throw IoError("RVOL " + header_path.string() + ": u8 data must have kind \"mask\"");
            if (bytes.size() != g.voxel_count())
                throw IoError("RVOL size mismatch: " + raw.string() + " holds " + std::to_string(bytes.size()) +
                              " bytes, header declares " + std::to_string(g.voxel_count()) + " voxels");
            std::vector<std::uint8_t> v(bytes.begin(), bytes.end());
            for (std::size_t i = 0; i < v.size(); ++i)
                if (v[i] > 1)
                    throw IoError("RVOL " + raw.string() + ": non-binary value " + std::to_string(v[i]) +
                                  " at voxel " + std::to_string(i) + " in a mask");
            return Volume::mask(g, std::move(v));
        }
        if (dtype == "f32") {
            if (bytes.size() != 4 * g.voxel_count())
                throw IoError("RVOL size mismatch: " + raw.string() + " holds " + std::to_string(bytes.size()) +
                              " bytes, header declares " + std::to_string(g.voxel_count()) + " f32 voxels");
            std::vector<float> v(g.voxel_count());
            for (std::size_t i = 0; i < v.size(); ++i) {
                std::uint32_t w;
                std::memcpy(&w, bytes.data() + 4 * i, 4);
                v[i] = std::bit_cast<float>(to_le(w));
            }
            if (kind == "prob") return Volume::probability(g, std::move(v));
            if (kind == "image") return Volume::intensity(g, std::move(v));
            throw IoError("RVOL " + header_path.string() + ": f32 data must have kind \"prob\" or \"image\"");
        }
        throw IoError("RVOL " + header_path.string() + ": unsupported dtype \"" + dtype + "\"");
    } catch (const json::exception& e) {
        throw IoError("malformed RVOL header " + header_path.string() + ": " + e.what());
    }
}

void save_volume(const fs::path& header_path, const Volume& v) {
    const fs::path raw = raw_path_for(header_path);
    std::string bytes;
    if (v.is_mask()) {
        const auto m = v.mask_values();
        bytes.assign(reinterpret_cast<const char*>(m.data()), m.size());
    } else {
        const auto f = v.prob_values();
        bytes.resize(4 * f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
            const std::uint32_t w = to_le(std::bit_cast<std::uint32_t>(f[i]));
            std::memcpy(bytes.data() + 4 * i, &w, 4);
        }
    }
    const auto& g = v.geometry();
    json h;
    h["format"] = "RVOL";
    h["version"] = 1;
    h["dims"] = g.dims;
    h["spacing_mm"] = g.spacing;
    h["dtype"] = v.is_mask() ? "u8" : "f32";
    h["kind"] = kind_name(v.kind());
    h["data"] = raw.filename().string();
    write_file_atomic(raw, bytes);
    write_file_atomic(header_path, h.dump(2) + "\n");
}

}  // namespace raterlab
