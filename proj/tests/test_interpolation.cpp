#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>

#include "jiif/coord.hpp"
#include "jiif/image.hpp"
#include "jiif/interpolation.hpp"
#include "jiif/rng.hpp"

using namespace jiif;
using Catch::Matchers::WithinAbs;

namespace {

RasterImage ramp_image(int64_t h, int64_t w, double ay, double ax) {
    RasterImage img(h, w, 1);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            img.at(0, y, x) = ay * static_cast<double>(y) + ax * static_cast<double>(x);
    return img;
}

}  // namespace

TEST_CASE("bilinear weights at the quarter point") {
    // Frozen: corners of a 2x2 grid sit at +-0.5; the query (-0.25,-0.25)
    // lies a quarter of a cell from the top-left corner, giving area weights
    // (0.5625, 0.1875, 0.1875, 0.0625) in TL,TR,BL,BR order.
    QueryBundle q = corner_neighbors({-0.25, -0.25}, 2, 2);
    auto w = bilinear_weights(q);
    REQUIRE_THAT(w[0], WithinAbs(0.5625, 1e-12));
    REQUIRE_THAT(w[1], WithinAbs(0.1875, 1e-12));
    REQUIRE_THAT(w[2], WithinAbs(0.1875, 1e-12));
    REQUIRE_THAT(w[3], WithinAbs(0.0625, 1e-12));
}

TEST_CASE("bilinear weights are a partition of unity") {
    Rng rng(61);
    for (int rep = 0; rep < 500; ++rep) {
        const int64_t h = 1 + rng.uniform_int(9);
        const int64_t w = 1 + rng.uniform_int(9);
        QueryBundle q = corner_neighbors({rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}, h, w);
        auto ws = bilinear_weights(q);
        double sum = 0.0;
        for (double v : ws) {
            REQUIRE(v >= -1e-12);
            sum += v;
        }
        REQUIRE_THAT(sum, WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("weighted_interpolate is the plain dot product") {
    std::array<double, 4> w{0.5625, 0.1875, 0.1875, 0.0625};
    std::array<double, 4> v{1.0, 2.0, 3.0, 4.0};
    REQUIRE_THAT(weighted_interpolate(w, v), WithinAbs(1.75, 1e-12));
}

TEST_CASE("bilinear_at hits the midpoint of a ramp") {
    // Frozen: 1x4 ramp 0,1,2,3; x=0 lies between pixels 1 and 2.
    RasterImage img = ramp_image(1, 4, 0.0, 1.0);
    REQUIRE_THAT(bilinear_at(img.plane(0), 1, 4, {0.0, 0.0}), WithinAbs(1.5, 1e-12));
}

TEST_CASE("bilinear_at reproduces values at pixel centers") {
    Rng rng(67);
    RasterImage img(5, 7, 1);
    for (int64_t i = 0; i < 35; ++i) img.data[static_cast<size_t>(i)] = rng.uniform(0.0, 10.0);
    CoordGrid g = make_coord_grid(5, 7);
    for (int64_t y = 0; y < 5; ++y)
        for (int64_t x = 0; x < 7; ++x)
            REQUIRE_THAT(bilinear_at(img.plane(0), 5, 7, g.coord(y, x)),
                         WithinAbs(img.at(0, y, x), 1e-12));
}

TEST_CASE("bilinear_at is exact on linear images away from the border") {
    RasterImage img = ramp_image(8, 8, 2.0, 3.0);
    Rng rng(71);
    for (int rep = 0; rep < 200; ++rep) {
        // Keep the query inside the span of pixel centers.
        double y = rng.uniform(axis_center(0, 8), axis_center(7, 8));
        double x = rng.uniform(axis_center(0, 8), axis_center(7, 8));
        double py = axis_position(y, 8), px = axis_position(x, 8);
        REQUIRE_THAT(bilinear_at(img.plane(0), 8, 8, {y, x}), WithinAbs(2.0 * py + 3.0 * px, 1e-10));
    }
}

TEST_CASE("reflect_index mirrors around edge pixels") {
    REQUIRE(reflect_index(-1, 5) == 1);
    REQUIRE(reflect_index(-2, 5) == 2);
    REQUIRE(reflect_index(5, 5) == 3);
    REQUIRE(reflect_index(6, 5) == 2);
    REQUIRE(reflect_index(7, 5) == 1);
    REQUIRE(reflect_index(8, 5) == 0);
    REQUIRE(reflect_index(2, 5) == 2);
    REQUIRE(reflect_index(0, 1) == 0);
    REQUIRE(reflect_index(-3, 1) == 0);
    REQUIRE(reflect_index(9, 1) == 0);
}

TEST_CASE("cubic tap weights interpolate and sum to one") {
    auto w0 = cubic_tap_weights(0.0);
    REQUIRE_THAT(w0[0], WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(w0[1], WithinAbs(1.0, 1e-15));
    REQUIRE_THAT(w0[2], WithinAbs(0.0, 1e-15));
    REQUIRE_THAT(w0[3], WithinAbs(0.0, 1e-15));
    // Frozen midpoint taps of the a=-0.5 kernel.
    auto wh = cubic_tap_weights(0.5);
    REQUIRE_THAT(wh[0], WithinAbs(-0.0625, 1e-12));
    REQUIRE_THAT(wh[1], WithinAbs(0.5625, 1e-12));
    REQUIRE_THAT(wh[2], WithinAbs(0.5625, 1e-12));
    REQUIRE_THAT(wh[3], WithinAbs(-0.0625, 1e-12));
    Rng rng(73);
    for (int rep = 0; rep < 300; ++rep) {
        auto w = cubic_tap_weights(rng.uniform());
        REQUIRE_THAT(w[0] + w[1] + w[2] + w[3], WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("bicubic_at is exact on linear images in the interior") {
    RasterImage img = ramp_image(10, 10, 2.0, 3.0);
    Rng rng(79);
    for (int rep = 0; rep < 200; ++rep) {
        // Keep every tap of the 4x4 window inside the image.
        double py = rng.uniform(1.0, 8.0);
        double px = rng.uniform(1.0, 8.0);
        Vec2 c{axis_center(0, 10) + py * 0.2, axis_center(0, 10) + px * 0.2};
        REQUIRE_THAT(bicubic_at(img.plane(0), 10, 10, c),
                     WithinAbs(2.0 * axis_position(c.y, 10) + 3.0 * axis_position(c.x, 10), 1e-9));
    }
}

TEST_CASE("bicubic same-size resample reproduces the input") {
    // Positions recovered through the coordinate round trip carry an ulp of
    // noise, so this is identity up to rounding rather than bit-for-bit.
    Rng rng(83);
    RasterImage img(6, 9, 2);
    for (auto& v : img.data) v = rng.uniform(0.0, 5.0);
    RasterImage out = bicubic_resample(img, 6, 9);
    for (size_t i = 0; i < img.data.size(); ++i)
        REQUIRE_THAT(out.data[i], WithinAbs(img.data[i], 1e-12));
}

TEST_CASE("bicubic resample preserves constants") {
    RasterImage img(3, 4, 1);
    for (auto& v : img.data) v = 2.5;
    RasterImage out = bicubic_resample(img, 12, 16);
    for (double v : out.data) REQUIRE_THAT(v, WithinAbs(2.5, 1e-12));
}

TEST_CASE("bicubic resample of a 1x1 image broadcasts its value") {
    RasterImage img(1, 1, 1);
    img.data[0] = 7.25;
    RasterImage out = bicubic_resample(img, 4, 4);
    for (double v : out.data) REQUIRE(v == 7.25);
}

TEST_CASE("bilinear resample preserves constants and size contract") {
    RasterImage img(2, 2, 1);
    for (auto& v : img.data) v = 1.5;
    RasterImage out = bilinear_resample(img, 8, 6);
    REQUIRE(out.height == 8);
    REQUIRE(out.width == 6);
    for (double v : out.data) REQUIRE_THAT(v, WithinAbs(1.5, 1e-12));
}

TEST_CASE("upsampling a ramp keeps values within the input range") {
    RasterImage img = ramp_image(4, 4, 1.0, 1.0);
    RasterImage out = bilinear_resample(img, 16, 16);
    for (double v : out.data) {
        REQUIRE(v >= 0.0 - 1e-12);
        REQUIRE(v <= 6.0 + 1e-12);
    }
}
