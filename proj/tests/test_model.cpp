#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jiif/model.hpp"
#include "jiif/rng.hpp"

using namespace jiif;
using Catch::Matchers::WithinAbs;

namespace {

ModelConfig tiny_config(DecoderMode mode, WeightStrategy strategy) {
    ModelConfig cfg;
    cfg.depth_encoder = {1, 4, 1, 3};
    cfg.guide_encoder = {3, 4, 1, 3};
    cfg.decoder.mode = mode;
    cfg.decoder.strategy = strategy;
    cfg.decoder.latent_dim = 4;
    cfg.decoder.guide_dim = 4;
    cfg.decoder.hidden = {8};
    cfg.chunk_size = 30720;
    return cfg;
}

RasterImage random_image(int64_t h, int64_t w, int64_t c, uint64_t seed, double lo = 0.2,
                         double hi = 1.0) {
    RasterImage img(h, w, c);
    Rng rng(seed);
    for (auto& v : img.data) v = rng.uniform(lo, hi);
    return img;
}

std::vector<Vec2> some_queries(int64_t hr_h, int64_t hr_w, int n, uint64_t seed) {
    CoordGrid g = make_coord_grid(hr_h, hr_w);
    Rng rng(seed);
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i)
        out.push_back(g.coord(rng.uniform_int(hr_h), rng.uniform_int(hr_w)));
    return out;
}

}  // namespace

TEST_CASE("batched prediction matches the scalar reference in every mode") {
    const RasterImage lr = random_image(4, 4, 1, 1);
    const RasterImage hr = random_image(8, 8, 3, 2);
    const auto queries = some_queries(8, 8, 9, 3);
    struct Case {
        DecoderMode mode;
        WeightStrategy strategy;
    } cases[] = {
        {DecoderMode::joint, WeightStrategy::graph_attention},
        {DecoderMode::separate, WeightStrategy::graph_attention},
        {DecoderMode::value_only, WeightStrategy::bilinear},
        {DecoderMode::value_only, WeightStrategy::direct_regression},
    };
    for (const Case& c : cases) {
        JIIFModel model(tiny_config(c.mode, c.strategy), 99);
        const std::vector<double> ref = model.forward(lr, hr, queries);
        ag::NoGradGuard guard;
        ag::Var pred = model.predict(ag::constant(lr.to_tensor()),
                                     ag::constant(hr.to_tensor()), queries);
        REQUIRE(pred->value.dim(0) == static_cast<int64_t>(queries.size()));
        for (size_t q = 0; q < queries.size(); ++q) {
            INFO("mode " << static_cast<int>(c.mode) << " strategy "
                         << static_cast<int>(c.strategy) << " query " << q);
            REQUIRE_THAT(pred->value[static_cast<int64_t>(q)], WithinAbs(ref[q], 1e-6));
        }
    }
}

TEST_CASE("zeroed decoder with residual reproduces bicubic exactly") {
    JIIFModel model(tiny_config(DecoderMode::joint, WeightStrategy::graph_attention), 7);
    for (const ag::Var& p : model.decoder().parameters()) p->value.fill(0.0);
    const RasterImage lr = random_image(4, 4, 1, 11);
    const RasterImage hr = random_image(16, 16, 3, 13);
    const RasterImage pred = model.full_inference(lr, hr);
    const RasterImage base = bicubic_resample(lr, 16, 16);
    REQUIRE(pred.data == base.data);
}

TEST_CASE("full_inference is invariant to the chunk size") {
    const RasterImage lr = random_image(4, 4, 1, 17);
    const RasterImage hr = random_image(8, 8, 3, 19);
    ModelConfig cfg = tiny_config(DecoderMode::joint, WeightStrategy::graph_attention);
    std::vector<double> reference;
    for (int64_t chunk : {1, 7, 64, 65536}) {
        cfg.chunk_size = chunk;
        JIIFModel model(cfg, 21);
        const RasterImage out = model.full_inference(lr, hr);
        if (reference.empty())
            reference = out.data;
        else
            REQUIRE(out.data == reference);
    }
}

TEST_CASE("full_inference agrees with the reference queried pixel by pixel") {
    JIIFModel model(tiny_config(DecoderMode::joint, WeightStrategy::graph_attention), 23);
    const RasterImage lr = random_image(4, 4, 1, 27);
    const RasterImage hr = random_image(8, 8, 3, 29);
    const RasterImage out = model.full_inference(lr, hr);
    REQUIRE(out.height == 8);
    REQUIRE(out.width == 8);
    const CoordGrid grid = make_coord_grid(8, 8);
    std::vector<Vec2> all;
    for (int64_t i = 0; i < 8; ++i)
        for (int64_t j = 0; j < 8; ++j) all.push_back(grid.coord(i, j));
    const std::vector<double> ref = model.forward(lr, hr, all);
    for (size_t k = 0; k < all.size(); ++k)
        REQUIRE_THAT(out.data[k], WithinAbs(ref[k], 1e-6));
}

TEST_CASE("duplicate queries produce duplicate outputs") {
    JIIFModel model(tiny_config(DecoderMode::joint, WeightStrategy::graph_attention), 31);
    const RasterImage lr = random_image(4, 4, 1, 33);
    const RasterImage hr = random_image(8, 8, 3, 37);
    const Vec2 q = make_coord_grid(8, 8).coord(3, 5);
    const std::vector<double> out = model.forward(lr, hr, {q, q, q});
    REQUIRE(out[0] == out[1]);
    REQUIRE(out[1] == out[2]);
}

TEST_CASE("constant decoded value passes through every weighting strategy") {
    // Zero all decoder parameters, then plant c in the value head's final
    // bias: every corner decodes to c, so the weighted average must be c.
    const double c = 0.625;
    const RasterImage lr = random_image(4, 4, 1, 41);
    const RasterImage hr = random_image(8, 8, 3, 43);
    const auto queries = some_queries(8, 8, 6, 47);
    struct Case {
        DecoderMode mode;
        WeightStrategy strategy;
        const char* bias_name;
    } cases[] = {
        {DecoderMode::joint, WeightStrategy::graph_attention, "decoder.joint.l1.b"},
        {DecoderMode::separate, WeightStrategy::graph_attention, "decoder.value.l1.b"},
        {DecoderMode::value_only, WeightStrategy::bilinear, "decoder.value.l1.b"},
        {DecoderMode::value_only, WeightStrategy::direct_regression, "decoder.value.l1.b"},
    };
    for (const Case& cse : cases) {
        ModelConfig cfg = tiny_config(cse.mode, cse.strategy);
        cfg.use_residual = false;
        JIIFModel model(cfg, 53);
        for (const ag::Var& p : model.decoder().parameters()) p->value.fill(0.0);
        bool planted = false;
        for (auto& [name, p] : model.named_parameters()) {
            if (name == cse.bias_name) {
                p->value[0] = c;
                planted = true;
            }
        }
        REQUIRE(planted);
        for (double v : model.forward(lr, hr, queries)) {
            INFO("strategy " << static_cast<int>(cse.strategy));
            REQUIRE_THAT(v, WithinAbs(c, 1e-9));
        }
    }
}

TEST_CASE("one parameter set serves multiple scales") {
    JIIFModel model(tiny_config(DecoderMode::joint, WeightStrategy::graph_attention), 59);
    const RasterImage lr = random_image(4, 4, 1, 61);
    for (int64_t scale : {2, 4, 8}) {
        const RasterImage hr = random_image(4 * scale, 4 * scale, 3, 63);
        const RasterImage out = model.full_inference(lr, hr);
        REQUIRE(out.height == 4 * scale);
        REQUIRE(out.width == 4 * scale);
        for (double v : out.data) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("model rejects inconsistent input sizes") {
    JIIFModel model(tiny_config(DecoderMode::joint, WeightStrategy::graph_attention), 67);
    const RasterImage lr = random_image(4, 4, 1, 69);
    REQUIRE_THROWS_AS(model.full_inference(lr, random_image(9, 8, 3, 71)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(model.full_inference(lr, random_image(8, 16, 3, 73)),
                      std::invalid_argument);
    REQUIRE_THROWS_AS(model.full_inference(lr, random_image(8, 8, 1, 75)),
                      std::invalid_argument);
}

TEST_CASE("model config validation") {
    ModelConfig cfg = tiny_config(DecoderMode::joint, WeightStrategy::graph_attention);
    cfg.decoder.latent_dim = 5;  // depth encoder emits 4
    REQUIRE_THROWS_AS(JIIFModel(cfg, 1), std::invalid_argument);
    cfg = tiny_config(DecoderMode::joint, WeightStrategy::graph_attention);
    cfg.chunk_size = 0;
    REQUIRE_THROWS_AS(JIIFModel(cfg, 1), std::invalid_argument);
}

TEST_CASE("end-to-end gradients match finite differences") {
    ModelConfig cfg = tiny_config(DecoderMode::joint, WeightStrategy::graph_attention);
    JIIFModel model(cfg, 79);
    const RasterImage lr = random_image(4, 4, 1, 81);
    const RasterImage hr = random_image(8, 8, 3, 83);
    const auto queries = some_queries(8, 8, 3, 87);
    const Tensor lr_t = lr.to_tensor();
    const Tensor hr_t = hr.to_tensor();

    auto loss_value = [&]() {
        ag::NoGradGuard guard;
        return ag::mean_abs(model.predict(ag::constant(lr_t), ag::constant(hr_t), queries))
            ->value[0];
    };

    ag::Var loss =
        ag::mean_abs(model.predict(ag::constant(lr_t), ag::constant(hr_t), queries));
    ag::backward(loss);

    const double h = 1e-5;
    Rng pick(89);
    for (auto& [name, p] : model.named_parameters()) {
        // Check a handful of entries per tensor; every tensor is covered.
        const int64_t n = p->value.numel();
        for (int rep = 0; rep < 3; ++rep) {
            const int64_t i = pick.uniform_int(n);
            const double keep = p->value[i];
            p->value[i] = keep + h;
            const double up = loss_value();
            p->value[i] = keep - h;
            const double down = loss_value();
            p->value[i] = keep;
            const double fd = (up - down) / (2.0 * h);
            const double an = p->grad.numel() > 0 ? p->grad[i] : 0.0;
            INFO(name << "[" << i << "]");
            REQUIRE_THAT(an, WithinAbs(fd, 1e-4 * std::max(1.0, std::fabs(fd))));
        }
    }
}
