#pragma once

// NYU Depth v2 converter: reads the labeled MATLAB v7.3 archive (an HDF5
// file holding `images` uint8 [1449 x 3 x 640 x 480] and `depths` float
// [1449 x 640 x 480], column-major per MATLAB) and materializes the on-disk
// dataset layout. Compiled only when HDF5 is available.

#include <hdf5.h>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "jiif/data.hpp"
#include "jiif/errors.hpp"

namespace jiif {

struct NyuConvertCommand {
    std::string mat_path;            // nyu_depth_v2_labeled.mat
    std::string root = "data";       // output dataset root
    std::string dataset = "nyu_v2";  // output dataset name
    int64_t train_count = 1000;      // first N pairs -> train split
    int64_t test_count = 449;        // last N pairs  -> test split
    double depth_scale = 0.1;        // stored cm per count (1 mm resolution)
};

namespace detail_nyu {

struct H5Handle {
    hid_t id = -1;
    herr_t (*closer)(hid_t) = nullptr;
    H5Handle(hid_t h, herr_t (*c)(hid_t)) : id(h), closer(c) {}
    ~H5Handle() {
        if (id >= 0 && closer) closer(id);
    }
    H5Handle(const H5Handle&) = delete;
    H5Handle& operator=(const H5Handle&) = delete;
};

inline void check(bool ok, const std::string& msg) {
    if (!ok) throw DataError("nyu convert: " + msg);
}

/// Shape of a dataset, verified against an expected rank.
inline std::vector<hsize_t> dataset_dims(hid_t dset, int rank, const std::string& name) {
    H5Handle space(H5Dget_space(dset), &H5Sclose);
    check(space.id >= 0, "cannot read dataspace of " + name);
    check(H5Sget_simple_extent_ndims(space.id) == rank,
          name + ": expected a rank-" + std::to_string(rank) + " dataset");
    std::vector<hsize_t> dims(static_cast<size_t>(rank));
    H5Sget_simple_extent_dims(space.id, dims.data(), nullptr);
    return dims;
}

/// Read element block i (the slowest-varying index) of `dset` into `out`.
template <typename T>
inline void read_slab(hid_t dset, const std::vector<hsize_t>& dims, hsize_t index, hid_t mem_type,
                      std::vector<T>& out, const std::string& name) {
    std::vector<hsize_t> offset(dims.size(), 0), count = dims;
    offset[0] = index;
    count[0] = 1;
    size_t n = 1;
    for (size_t d = 1; d < dims.size(); ++d) n *= static_cast<size_t>(dims[d]);
    out.resize(n);
    H5Handle space(H5Dget_space(dset), &H5Sclose);
    check(space.id >= 0 &&
              H5Sselect_hyperslab(space.id, H5S_SELECT_SET, offset.data(), nullptr, count.data(),
                                  nullptr) >= 0,
          "hyperslab selection failed for " + name);
    H5Handle mem(H5Screate_simple(static_cast<int>(count.size()), count.data(), nullptr),
                 &H5Sclose);
    check(mem.id >= 0, "memory dataspace failed for " + name);
    check(H5Dread(dset, mem_type, mem.id, space.id, H5P_DEFAULT, out.data()) >= 0,
          "read failed for " + name);
}

}  // namespace detail_nyu

/// Convert the labeled NYU v2 archive into train/test splits on disk.
/// Depth is stored in centimeters at `depth_scale` cm per count.
inline void run_convert_nyu(const NyuConvertCommand& cmd, std::ostream* console = nullptr) {
    using namespace detail_nyu;
    require(cmd.train_count >= 1 && cmd.test_count >= 1,
            "convert-nyu: split sizes must be positive");
    require(cmd.depth_scale > 0.0, "convert-nyu: depth scale must be positive");
    require(!cmd.mat_path.empty(), "convert-nyu: --mat is required");

    H5Handle file(H5Fopen(cmd.mat_path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), &H5Fclose);
    check(file.id >= 0, "cannot open " + cmd.mat_path);
    H5Handle images(H5Dopen2(file.id, "/images", H5P_DEFAULT), &H5Dclose);
    H5Handle depths(H5Dopen2(file.id, "/depths", H5P_DEFAULT), &H5Dclose);
    check(images.id >= 0 && depths.id >= 0, "missing /images or /depths dataset");

    // MATLAB column-major [480 x 640 x 3 x N] appears in HDF5 (row-major)
    // with reversed axes: images [N x 3 x 640 x 480], depths [N x 640 x 480].
    const auto idims = dataset_dims(images.id, 4, "/images");
    const auto ddims = dataset_dims(depths.id, 3, "/depths");
    check(idims[1] == 3, "/images: expected 3 channels");
    check(idims[0] == ddims[0] && idims[2] == ddims[1] && idims[3] == ddims[2],
          "/images and /depths disagree on pair count or resolution");
    const int64_t total = static_cast<int64_t>(idims[0]);
    const int64_t w = static_cast<int64_t>(idims[2]);
    const int64_t h = static_cast<int64_t>(idims[3]);
    require(cmd.train_count + cmd.test_count <= total,
            "convert-nyu: splits need " + std::to_string(cmd.train_count + cmd.test_count) +
                " pairs but the archive holds " + std::to_string(total));

    auto convert_range = [&](int64_t begin, int64_t count, const std::string& split) {
        std::vector<uint8_t> ibuf;
        std::vector<double> dbuf;
        // One pair at a time: the full archive would not fit in memory.
        for (int64_t k = 0; k < count; ++k) {
            const int64_t i = begin + k;
            read_slab(images.id, idims, static_cast<hsize_t>(i), H5T_NATIVE_UINT8, ibuf,
                      "/images");
            read_slab(depths.id, ddims, static_cast<hsize_t>(i), H5T_NATIVE_DOUBLE, dbuf,
                      "/depths");
            RGBDPair p;
            char id[32];
            std::snprintf(id, sizeof(id), "%06lld", static_cast<long long>(i));
            p.id = id;
            p.value_kind = ValueKind::depth;
            p.guide = RasterImage(h, w, 3);
            p.depth = RasterImage(h, w, 1);
            // Slab layouts: ibuf[c][x][y], dbuf[x][y] (x = column, y = row).
            for (int64_t c = 0; c < 3; ++c)
                for (int64_t x = 0; x < w; ++x)
                    for (int64_t y = 0; y < h; ++y)
                        p.guide.at(c, y, x) =
                            static_cast<double>(ibuf[static_cast<size_t>((c * w + x) * h + y)]) /
                            255.0;
            for (int64_t x = 0; x < w; ++x)
                for (int64_t y = 0; y < h; ++y) {
                    const double meters = dbuf[static_cast<size_t>(x * h + y)];
                    check(std::isfinite(meters) && meters >= 0.0,
                          "invalid depth in pair " + p.id);
                    p.depth.at(0, y, x) = meters * 100.0;  // store centimeters
                }
            p.depth.range_lo = 0.0;
            p.depth.range_hi = 65535.0 * cmd.depth_scale;
            write_dataset({std::move(p)}, cmd.dataset, split, cmd.root, cmd.depth_scale);
            if (console && (k + 1) % 100 == 0)
                *console << "  converted " << (k + 1) << "/" << count << " (" << split << ")\n";
        }
        if (console)
            *console << "wrote " << count << " pairs to " << cmd.root << "/" << cmd.dataset << "/"
                     << split << "\n";
    };

    convert_range(0, cmd.train_count, "train");
    convert_range(total - cmd.test_count, cmd.test_count, "test");
}

}  // namespace jiif
