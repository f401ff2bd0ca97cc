#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "jiif/decoder.hpp"
#include "jiif/rng.hpp"

using namespace jiif;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::vector<double> random_vec(size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

void zero_params(const JiifDecoder& dec) {
    for (const ag::Var& p : dec.parameters()) p->value.fill(0.0);
}

DecoderConfig small_config(DecoderMode mode, WeightStrategy strategy) {
    DecoderConfig cfg;
    cfg.mode = mode;
    cfg.strategy = strategy;
    cfg.latent_dim = 6;
    cfg.guide_dim = 6;
    cfg.hidden = {16, 8};
    return cfg;
}

}  // namespace

TEST_CASE("mode and strategy combinations") {
    REQUIRE(valid_combo(DecoderMode::joint, WeightStrategy::graph_attention));
    REQUIRE(valid_combo(DecoderMode::separate, WeightStrategy::graph_attention));
    REQUIRE(valid_combo(DecoderMode::value_only, WeightStrategy::bilinear));
    REQUIRE(valid_combo(DecoderMode::value_only, WeightStrategy::direct_regression));
    REQUIRE_FALSE(valid_combo(DecoderMode::joint, WeightStrategy::bilinear));
    REQUIRE_FALSE(valid_combo(DecoderMode::separate, WeightStrategy::direct_regression));
    REQUIRE_FALSE(valid_combo(DecoderMode::value_only, WeightStrategy::graph_attention));
    REQUIRE_THROWS_AS(JiifDecoder(small_config(DecoderMode::joint, WeightStrategy::bilinear), Rng(1)),
                      std::invalid_argument);
}

TEST_CASE("joint input width is 3 feature dims plus 2") {
    DecoderConfig cfg;  // defaults: 128-dim features
    JiifDecoder dec(cfg, Rng(3));
    REQUIRE(dec.joint_input_dim() == 386);
    REQUIRE(dec.value_input_dim() == 258);
    REQUIRE(dec.weight_input_dim() == 256);
}

TEST_CASE("default joint decoder is five affine maps with tapering widths") {
    JiifDecoder dec(DecoderConfig{}, Rng(5));
    auto named = dec.named_parameters("");
    REQUIRE(named.size() == 10);  // 5 layers x (w, b)
    const int64_t widths[6] = {386, 1024, 512, 256, 128, 2};
    for (int i = 0; i < 5; ++i) {
        const Tensor& w = named[static_cast<size_t>(2 * i)].second->value;
        REQUIRE(w.dim(0) == widths[i]);
        REQUIRE(w.dim(1) == widths[i + 1]);
    }
}

TEST_CASE("zeroed decoder emits zero value and zero logit") {
    JiifDecoder dec(small_config(DecoderMode::joint, WeightStrategy::graph_attention), Rng(7));
    zero_params(dec);
    Rng rng(9);
    auto out = dec.decode_joint_one(random_vec(static_cast<size_t>(dec.joint_input_dim()), rng));
    REQUIRE(out[0] == 0.0);
    REQUIRE(out[1] == 0.0);

    JiifDecoder sep(small_config(DecoderMode::separate, WeightStrategy::graph_attention), Rng(7));
    zero_params(sep);
    REQUIRE(sep.decode_value_one(random_vec(static_cast<size_t>(sep.value_input_dim()), rng)) == 0.0);
    REQUIRE(sep.decode_weight_one(random_vec(static_cast<size_t>(sep.weight_input_dim()), rng)) == 0.0);
}

TEST_CASE("decoder forward is deterministic") {
    JiifDecoder dec(small_config(DecoderMode::joint, WeightStrategy::graph_attention), Rng(11));
    Rng rng(13);
    auto feats = random_vec(static_cast<size_t>(dec.joint_input_dim()), rng);
    auto a = dec.decode_joint_one(feats);
    auto b = dec.decode_joint_one(feats);
    REQUIRE(a[0] == b[0]);
    REQUIRE(a[1] == b[1]);
}

TEST_CASE("batched decode matches the single-row reference") {
    JiifDecoder dec(small_config(DecoderMode::joint, WeightStrategy::graph_attention), Rng(17));
    Rng rng(19);
    const int64_t n = 5;
    const int64_t d = dec.joint_input_dim();
    Tensor batch({n, d});
    std::vector<std::vector<double>> rows;
    for (int64_t i = 0; i < n; ++i) {
        auto row = random_vec(static_cast<size_t>(d), rng);
        rows.push_back(row);
        for (int64_t j = 0; j < d; ++j) batch.at(i, j) = row[static_cast<size_t>(j)];
    }
    ag::Var out = dec.decode_joint(ag::constant(batch));
    for (int64_t i = 0; i < n; ++i) {
        auto ref = dec.decode_joint_one(rows[static_cast<size_t>(i)]);
        REQUIRE_THAT(out->value.at(i, 0), WithinAbs(ref[0], 1e-9));
        REQUIRE_THAT(out->value.at(i, 1), WithinAbs(ref[1], 1e-9));
    }
}

TEST_CASE("value gradient w.r.t. relative coordinate matches finite differences") {
    JiifDecoder dec(small_config(DecoderMode::joint, WeightStrategy::graph_attention), Rng(23));
    Rng rng(29);
    const int64_t d = dec.joint_input_dim();
    Tensor feats({1, d});
    for (int64_t j = 0; j < d; ++j) feats[j] = rng.uniform(-1.0, 1.0);
    ag::Var x = ag::parameter(feats);
    ag::Var v = ag::slice_cols(dec.decode_joint(x), 0, 1);
    ag::backward(ag::sum(v));
    // The last two columns are x_rel.
    for (int64_t j = d - 2; j < d; ++j) {
        const double h = 1e-6;
        Tensor fp = feats, fm = feats;
        fp[j] += h;
        fm[j] -= h;
        ag::NoGradGuard guard;
        const double vp = dec.decode_joint(ag::constant(fp))->value[0];
        const double vm = dec.decode_joint(ag::constant(fm))->value[0];
        const double fd = (vp - vm) / (2.0 * h);
        REQUIRE_THAT(x->grad[j], WithinRel(fd, 1e-4));
    }
}

TEST_CASE("weight head is asymmetric in its arguments") {
    JiifDecoder dec(small_config(DecoderMode::separate, WeightStrategy::graph_attention), Rng(31));
    Rng rng(37);
    const size_t c = 6;
    auto g_i = random_vec(c, rng);
    auto g_q = random_vec(c, rng);
    std::vector<double> fwd, rev;
    for (size_t k = 0; k < c; ++k) fwd.push_back(g_i[k]);
    for (size_t k = 0; k < c; ++k) fwd.push_back(g_q[k] - g_i[k]);
    for (size_t k = 0; k < c; ++k) rev.push_back(g_q[k]);
    for (size_t k = 0; k < c; ++k) rev.push_back(g_i[k] - g_q[k]);
    REQUIRE(dec.decode_weight_one(fwd) != dec.decode_weight_one(rev));
}

TEST_CASE("equal guide codes give uniform attention weights") {
    JiifDecoder dec(small_config(DecoderMode::separate, WeightStrategy::graph_attention), Rng(41));
    Rng rng(43);
    auto g = random_vec(6, rng);
    std::vector<double> feats;
    for (double v : g) feats.push_back(v);
    for (size_t k = 0; k < 6; ++k) feats.push_back(0.0);  // g_rel = 0
    const double logit = dec.decode_weight_one(feats);
    auto w = normalize_weights({logit, logit, logit, logit});
    for (double v : w) REQUIRE_THAT(v, WithinAbs(0.25, 1e-12));
}

TEST_CASE("normalize_weights basics") {
    auto uniform = normalize_weights({0.0, 0.0, 0.0, 0.0});
    for (double v : uniform) REQUIRE_THAT(v, WithinAbs(0.25, 1e-15));

    auto onehot = normalize_weights({10.0, -100.0, -100.0, -100.0});
    REQUIRE_THAT(onehot[0], WithinAbs(1.0, 1e-6));
    for (int i = 1; i < 4; ++i) REQUIRE_THAT(onehot[i], WithinAbs(0.0, 1e-6));

    // Frozen from an independent high-precision evaluation of softmax(1,2,3,4).
    auto soft = normalize_weights({1.0, 2.0, 3.0, 4.0});
    REQUIRE_THAT(soft[0], WithinAbs(0.0321, 5e-5));
    REQUIRE_THAT(soft[1], WithinAbs(0.0871, 5e-5));
    REQUIRE_THAT(soft[2], WithinAbs(0.2369, 5e-5));
    REQUIRE_THAT(soft[3], WithinAbs(0.6439, 5e-5));
}

TEST_CASE("normalize_weights is positive, normalized, and shift invariant") {
    Rng rng(47);
    for (int rep = 0; rep < 200; ++rep) {
        std::array<double, 4> logits;
        for (double& l : logits) l = rng.uniform(-30.0, 30.0);
        auto w = normalize_weights(logits);
        double sum = 0.0;
        for (double v : w) {
            REQUIRE(v > 0.0);
            sum += v;
        }
        REQUIRE_THAT(sum, WithinAbs(1.0, 1e-6));
        const double c = rng.uniform(-50.0, 50.0);
        std::array<double, 4> shifted = logits;
        for (double& l : shifted) l += c;
        auto ws = normalize_weights(shifted);
        for (int i = 0; i < 4; ++i) REQUIRE_THAT(ws[i], WithinAbs(w[i], 1e-6));
    }
}

TEST_CASE("normalize_weights rejects non-finite logits") {
    REQUIRE_THROWS_AS(normalize_weights({std::nan(""), 0.0, 0.0, 0.0}), std::invalid_argument);
    REQUIRE_THROWS_AS(normalize_weights({0.0, 0.0, std::nan(""), 0.0}), std::invalid_argument);
}

TEST_CASE("direct regression head maps guide code to four logits") {
    JiifDecoder dec(small_config(DecoderMode::value_only, WeightStrategy::direct_regression),
                    Rng(53));
    Rng rng(59);
    auto g_q = random_vec(6, rng);
    auto logits = dec.direct_weights_one(g_q);
    Tensor batch({1, 6});
    for (int64_t j = 0; j < 6; ++j) batch[j] = g_q[static_cast<size_t>(j)];
    ag::Var out = dec.direct_weights(ag::constant(batch));
    for (int64_t j = 0; j < 4; ++j) REQUIRE_THAT(out->value[j], WithinAbs(logits[static_cast<size_t>(j)], 1e-12));

    JiifDecoder bilinear_only(small_config(DecoderMode::value_only, WeightStrategy::bilinear),
                              Rng(53));
    REQUIRE_THROWS_AS(bilinear_only.direct_weights_one(g_q), std::invalid_argument);
}

TEST_CASE("parameter inventory tracks only the active heads") {
    JiifDecoder joint(small_config(DecoderMode::joint, WeightStrategy::graph_attention), Rng(61));
    for (auto& [name, p] : joint.named_parameters(""))
        REQUIRE(name.rfind("joint.", 0) == 0);

    JiifDecoder sep(small_config(DecoderMode::separate, WeightStrategy::graph_attention), Rng(61));
    bool has_value = false, has_weight = false;
    for (auto& [name, p] : sep.named_parameters("")) {
        has_value = has_value || name.rfind("value.", 0) == 0;
        has_weight = has_weight || name.rfind("weight.", 0) == 0;
        REQUIRE(name.rfind("joint.", 0) != 0);
    }
    REQUIRE(has_value);
    REQUIRE(has_weight);

    JiifDecoder direct(small_config(DecoderMode::value_only, WeightStrategy::direct_regression),
                       Rng(61));
    bool has_direct = false;
    for (auto& [name, p] : direct.named_parameters(""))
        has_direct = has_direct || name.rfind("direct.", 0) == 0;
    REQUIRE(has_direct);
}
