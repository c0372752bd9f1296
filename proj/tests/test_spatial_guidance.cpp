#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "charweave/errors.hpp"
#include "charweave/spatial_guidance.hpp"

using namespace charweave;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::filesystem::path fixtures_dir() { return CHARWEAVE_FIXTURES_DIR; }

// Density at a single point, evaluated through a 1x1 grid centered there.
double density_at(const PositionPrior& prior, double x, double y) {
    const Extent extent{x - 0.5, x + 0.5, y - 0.5, y + 0.5};
    return eval_prior(prior, {1, 1}, extent).values[0];
}

// Brute-force softmax of one row, summed in reverse order and without the
// max-subtraction trick, as an independent numeric path.
std::vector<double> softmax_row_oracle(const std::vector<double>& logits) {
    std::vector<double> exps(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) exps[i] = std::exp(logits[i]);
    double sum = 0.0;
    for (std::size_t i = exps.size(); i-- > 0;) sum += exps[i];
    for (double& v : exps) v /= sum;
    return exps;
}

double in_region_mass(const AttentionTensor& map, const Mask& mask, double beta, int token) {
    double mass = 0.0;
    for (int p = 0; p < map.pixels; ++p) {
        if (mask.values[p] >= beta) mass += map.at(p, token);
    }
    return mass;
}

EncoderWeights fixed_small_encoder() {
    EncoderWeights w;
    DenseLayer l0;
    l0.weights = Matrix(2, 3);
    l0.weights.data = {0.5, -0.25, 0.1, -0.3, 0.2, 0.4};
    l0.bias = {0.05, -0.1};
    DenseLayer l1;
    l1.weights = Matrix(3, 2);
    l1.weights.data = {0.7, -0.6, 0.15, 0.25, -0.2, 0.35};
    l1.bias = {0.01, -0.02, 0.03};
    w.layers = {l0, l1};
    return w;
}

}  // namespace

TEST_CASE("init_position_prior: horizontal placement formula") {
    CHECK(init_position_prior(0, 2).mu_x() == -1.0);
    CHECK(init_position_prior(1, 2).mu_x() == 1.0);
    CHECK(init_position_prior(0, 3).mu_x() == -1.0);
    CHECK(init_position_prior(1, 3).mu_x() == 0.0);
    CHECK(init_position_prior(2, 3).mu_x() == 1.0);
    CHECK(init_position_prior(0, 1).mu_x() == 0.0);  // singleton centered
    for (int n = 1; n <= 6; ++n) {
        for (int j = 0; j < n; ++j) {
            const PositionPrior prior = init_position_prior(j, n);
            CHECK(prior.mu_y() == 0.0);
            CHECK(prior.cov() == std::array<double, 4>{1.0, 0.0, 0.0, 1.0});
        }
    }
    CHECK_THROWS_AS(init_position_prior(2, 2), Error);
    CHECK_THROWS_AS(init_position_prior(-1, 2), Error);
    CHECK_THROWS_AS(init_position_prior(0, 0), Error);
}

TEST_CASE("PositionPrior: covariance must be symmetric positive definite") {
    CHECK_THROWS_AS(PositionPrior(0, 0, {1.0, 0.2, -0.2, 1.0}), Error);   // asymmetric
    CHECK_THROWS_AS(PositionPrior(0, 0, {-1.0, 0.0, 0.0, 1.0}), Error);   // negative variance
    CHECK_THROWS_AS(PositionPrior(0, 0, {1.0, 2.0, 2.0, 1.0}), Error);    // negative determinant
    CHECK_NOTHROW(PositionPrior(0, 0, {2.0, 0.5, 0.5, 1.0}));
}

TEST_CASE("eval_prior: unit-covariance peak density is 1/(2*pi)") {
    const PositionPrior prior = init_position_prior(0, 1);
    // 3x3 grid over [-1.5,1.5]^2 puts the center pixel exactly at the mean
    const Mask mask = eval_prior(prior, {3, 3});
    CHECK(mask.at(1, 1) == doctest::Approx(1.0 / kTwoPi).epsilon(1e-12));
    CHECK(mask.max_value() == mask.at(1, 1));
}

TEST_CASE("eval_prior: density is symmetric around the mean") {
    const PositionPrior prior = init_position_prior(0, 1);
    const Mask mask = eval_prior(prior, {5, 5}, {-2.5, 2.5, -2.5, 2.5});
    for (int d = 1; d <= 2; ++d) {
        CHECK(mask.at(2, 2 - d) == mask.at(2, 2 + d));
        CHECK(mask.at(2 - d, 2) == mask.at(2 + d, 2));
    }
}

TEST_CASE("eval_prior: Riemann sum over [-6,6]^2 integrates to 1") {
    const PositionPrior prior = init_position_prior(0, 1);
    const Mask mask = eval_prior(prior, {1200, 1200}, {-6.0, 6.0, -6.0, 6.0});
    double sum = 0.0;
    for (double v : mask.values) sum += v;
    sum *= 0.01 * 0.01;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("eval_prior: matches a brute-force density evaluation") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const double mx = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;
        const double my = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;
        const double a = 0.5 + static_cast<double>(rng()) / 4294967296.0;
        const double d = 0.5 + static_cast<double>(rng()) / 4294967296.0;
        const double c = 0.3 * ((static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0);
        const PositionPrior prior(mx, my, {a, c, c, d});
        const GridShape grid{7, 9};
        const Extent extent{-1.5, 1.5, -1.5, 1.5};
        const Mask mask = eval_prior(prior, grid, extent);

        const double det = a * d - c * c;
        for (int y = 0; y < grid.height; ++y) {
            for (int x = 0; x < grid.width; ++x) {
                const double px = extent.x_min + (x + 0.5) * 3.0 / grid.width;
                const double py = extent.y_min + (y + 0.5) * 3.0 / grid.height;
                const double dx = px - mx;
                const double dy = py - my;
                // explicit 2x2 inverse, the quadratic form written out
                const double quad = (d * dx * dx - c * dx * dy - c * dy * dx + a * dy * dy) / det;
                const double expected = std::exp(-0.5 * quad) / (kTwoPi * std::sqrt(det));
                CHECK(mask.at(y, x) == doctest::Approx(expected).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("knowledge_encoder_forward: zero weights give the identity deltas") {
    const EncoderWeights w = make_encoder_weights(4, {8}, 0, 0.0);
    const std::vector<double> feature = {0.3, -0.2, 0.9, 0.1};
    const SpatialDeltas out = knowledge_encoder_forward(feature, w);
    CHECK(out.dmu_x == 0.0);
    CHECK(out.dmu_y == 0.0);
    CHECK(out.gamma == 1.0);  // exp(0)
}

TEST_CASE("knowledge_encoder_forward: matches the hand-computed fixture") {
    const EncoderWeights w = fixed_small_encoder();
    const std::vector<double> feature = {0.2, -0.4, 0.3};
    const SpatialDeltas out = knowledge_encoder_forward(feature, w);
    CHECK(out.dmu_x == doctest::Approx(0.27268993551482446).epsilon(1e-12));
    CHECK(out.dmu_y == doctest::Approx(-0.008921062549126571).epsilon(1e-12));
    CHECK(out.gamma == doctest::Approx(0.93577466819041466).epsilon(1e-12));
}

TEST_CASE("knowledge_encoder_forward: dimension mismatch is an error") {
    const EncoderWeights w = make_encoder_weights(4, {8}, 0, 0.5);
    CHECK_THROWS_AS(knowledge_encoder_forward(std::vector<double>{1.0, 2.0}, w), Error);
}

TEST_CASE("knowledge_encoder_forward: gamma stays positive") {
    std::mt19937 rng(11);
    const EncoderWeights w = make_encoder_weights(6, {16, 16}, 3, 2.0);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> feature(6);
        for (double& v : feature)
            v = (static_cast<double>(rng()) / 4294967296.0) * 8.0 - 4.0;
        CHECK(knowledge_encoder_forward(feature, w).gamma > 0.0);
    }
}

TEST_CASE("make_encoder_weights: deterministic per seed") {
    const EncoderWeights a = make_encoder_weights(5, {7}, 42, 0.5);
    const EncoderWeights b = make_encoder_weights(5, {7}, 42, 0.5);
    const EncoderWeights c = make_encoder_weights(5, {7}, 43, 0.5);
    CHECK(flatten_parameters(a) == flatten_parameters(b));
    CHECK(flatten_parameters(a) != flatten_parameters(c));
}

TEST_CASE("enhance_prior: (0,0,1) is the identity on densities") {
    const PositionPrior prior = init_position_prior(0, 2);
    const PositionPrior same = enhance_prior(prior, {0.0, 0.0, 1.0});
    const Mask before = eval_prior(prior, {9, 9});
    const Mask after = eval_prior(same, {9, 9});
    CHECK(before.values == after.values);  // bitwise identical
}

TEST_CASE("enhance_prior: pure translation of the mean") {
    const PositionPrior prior = init_position_prior(0, 2);
    const PositionPrior moved = enhance_prior(prior, {0.5, 0.0, 1.0});
    CHECK(moved.mu_x() == -0.5);
    CHECK(moved.mu_y() == 0.0);
    CHECK(moved.cov() == prior.cov());
}

TEST_CASE("enhance_prior: gamma=4 drops the peak density fourfold") {
    const PositionPrior prior = init_position_prior(0, 1);
    const PositionPrior wide = enhance_prior(prior, {0.0, 0.0, 4.0});
    const double peak_before = density_at(prior, 0.0, 0.0);
    const double peak_after = density_at(wide, 0.0, 0.0);
    CHECK(peak_before / peak_after == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("enhance_prior: non-positive gamma is rejected") {
    const PositionPrior prior = init_position_prior(0, 1);
    CHECK_THROWS_AS(enhance_prior(prior, {0.0, 0.0, 0.0}), Error);
    CHECK_THROWS_AS(enhance_prior(prior, {0.0, 0.0, -1.0}), Error);
}

TEST_CASE("guidance_scale: exact base value and frozen references") {
    CHECK(guidance_scale(0, 2.5) == 2.5);  // ln(1) = 0, exact
    CHECK(guidance_scale(0, 1.0) == 1.0);
    CHECK(guidance_scale(99, 2.5) == doctest::Approx(14.012925464970228).epsilon(1e-9));
    CHECK(guidance_scale(999, 1.0) == doctest::Approx(7.907755278982137).epsilon(1e-9));
    CHECK_THROWS_AS(guidance_scale(-1, 2.5), Error);
}

TEST_CASE("guidance_scale: strictly increasing over the full schedule") {
    double previous = guidance_scale(0, 2.5);
    for (int t = 1; t <= 999; ++t) {
        const double s = guidance_scale(t, 2.5);
        CHECK(s > previous);
        previous = s;
    }
}

TEST_CASE("apply_guidance: zero strength copies the input exactly") {
    GuidanceConfig config;
    config.alpha = 0.0;
    config.grid = {2, 2};
    Mask mask{2, 2, {1.0, 0.5, 0.2, 0.1}};
    AttentionTensor logits{4, 3, false, {0.1, -0.2, 0.3, 0.4, 0.5, -0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2}};
    const AttentionTensor out = apply_guidance(logits, mask, {0, 2}, 0, config);
    CHECK(out == logits);
}

TEST_CASE("apply_guidance: in-region mass grows for the owned token") {
    GuidanceConfig config;
    config.alpha = 2.0;
    config.grid = {2, 2};
    // prior covering exactly half the pixels at beta = 0.85 * 1.0
    const Mask mask{2, 2, {1.0, 1.0, 0.1, 0.1}};
    const double beta = beta_threshold(mask, config.beta_fraction);

    std::mt19937 rng(17);
    AttentionTensor logits{4, 3, false, {}};
    logits.scores.resize(12);
    for (double& v : logits.scores)
        v = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;

    const AttentionTensor edited = apply_guidance(logits, mask, {1, 2}, 0, config);
    const AttentionTensor before = softmax_rows(logits);
    const AttentionTensor after = softmax_rows(edited);

    // brute-force per-pixel softmax oracle agrees with the implementation
    for (int p = 0; p < 4; ++p) {
        std::vector<double> row(3);
        for (int t = 0; t < 3; ++t) row[t] = edited.at(p, t);
        const std::vector<double> oracle = softmax_row_oracle(row);
        for (int t = 0; t < 3; ++t)
            CHECK(after.at(p, t) == doctest::Approx(oracle[t]).epsilon(1e-12));
    }

    CHECK(in_region_mass(after, mask, beta, 1) > in_region_mass(before, mask, beta, 1));
    // unowned token columns keep their logits untouched
    for (int p = 0; p < 4; ++p) {
        CHECK(edited.at(p, 0) == logits.at(p, 0));
        CHECK(edited.at(p, 2) == logits.at(p, 2));
    }
}

TEST_CASE("apply_guidance: logit edits for disjoint characters commute") {
    GuidanceConfig config;
    config.grid = {4, 4};
    const Mask mask_left = eval_prior(init_position_prior(0, 2), config.grid);
    const Mask mask_right = eval_prior(init_position_prior(1, 2), config.grid);

    std::mt19937 rng(23);
    AttentionTensor logits{16, 6, false, {}};
    logits.scores.resize(16 * 6);
    for (double& v : logits.scores)
        v = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;

    const TokenSpan left_span{0, 3};
    const TokenSpan right_span{3, 6};
    const AttentionTensor ab = apply_guidance(
        apply_guidance(logits, mask_left, left_span, 10, config), mask_right, right_span, 10,
        config);
    const AttentionTensor ba = apply_guidance(
        apply_guidance(logits, mask_right, right_span, 10, config), mask_left, left_span, 10,
        config);
    CHECK(ab == ba);  // additive edits on disjoint columns, bitwise equal
}

TEST_CASE("apply_guidance: rows stay normalized in both modes") {
    GuidanceConfig config;
    config.grid = {3, 3};
    const Mask mask = eval_prior(init_position_prior(0, 1), config.grid);

    std::mt19937 rng(31);
    AttentionTensor logits{9, 4, false, {}};
    logits.scores.resize(36);
    for (double& v : logits.scores)
        v = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;

    config.mode = GuidanceMode::logit;
    const AttentionTensor after_logit =
        softmax_rows(apply_guidance(logits, mask, {1, 3}, 499, config));
    CHECK_NOTHROW(check_normalized(after_logit));

    config.mode = GuidanceMode::post_softmax_renorm;
    const AttentionTensor map = softmax_rows(logits);
    const AttentionTensor after_renorm = apply_guidance(map, mask, {1, 3}, 499, config);
    CHECK_NOTHROW(check_normalized(after_renorm));
    for (double v : after_renorm.scores) CHECK(v >= 0.0);
}

TEST_CASE("apply_guidance: renorm mode falls back to uniform rows when clamped out") {
    GuidanceConfig config;
    config.mode = GuidanceMode::post_softmax_renorm;
    config.alpha = 14.0;
    config.grid = {1, 1};
    const Mask mask{1, 1, {0.0}};  // max 0 -> beta 0 -> the pixel is in-region
    AttentionTensor map{1, 1, true, {1.0}};
    // single token fully owned: +14 then renorm keeps the row at 1
    const AttentionTensor out = apply_guidance(map, mask, {0, 1}, 0, config);
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("apply_guidance: mode/state mismatches and bad spans are errors") {
    GuidanceConfig config;
    config.grid = {2, 2};
    const Mask mask{2, 2, {1.0, 0.5, 0.2, 0.1}};
    AttentionTensor logits{4, 3, false, std::vector<double>(12, 0.0)};
    AttentionTensor map = softmax_rows(logits);

    config.mode = GuidanceMode::logit;
    CHECK_THROWS_AS(apply_guidance(map, mask, {0, 1}, 0, config), Error);
    config.mode = GuidanceMode::post_softmax_renorm;
    CHECK_THROWS_AS(apply_guidance(logits, mask, {0, 1}, 0, config), Error);
    config.mode = GuidanceMode::logit;
    CHECK_THROWS_AS(apply_guidance(logits, mask, {0, 4}, 0, config), Error);
    CHECK_THROWS_AS(apply_guidance(logits, mask, {-1, 1}, 0, config), Error);
    const Mask wrong{3, 3, std::vector<double>(9, 0.1)};
    CHECK_THROWS_AS(apply_guidance(logits, wrong, {0, 1}, 0, config), Error);
}

TEST_CASE("apply_guidance: monotone in-region gain across random seeds") {
    GuidanceConfig config;
    config.grid = {8, 8};
    for (std::uint32_t seed = 0; seed < 5; ++seed) {
        const ToyHarness harness = build_toy_harness(config.grid, 8, 8, seed);
        const ToyAttentionResult attn =
            toy_cross_attention(harness.image_features, harness.text_features, 8, seed);
        for (int j = 0; j < 2; ++j) {
            const Mask mask = eval_prior(init_position_prior(j, 2), config.grid);
            const double beta = beta_threshold(mask, config.beta_fraction);
            const TokenSpan span{j * 4, j * 4 + 4};
            const AttentionTensor after =
                softmax_rows(apply_guidance(attn.scores, mask, span, 42, config));
            for (int t = span.begin; t < span.end; ++t) {
                CHECK(in_region_mass(after, mask, beta, t) >
                      in_region_mass(attn.map, mask, beta, t));
            }
        }
    }
}

TEST_CASE("toy_cross_attention: a single token takes all attention") {
    std::mt19937 rng(3);
    const Matrix image = seeded_matrix(6, 4, rng, 1.0);
    const Matrix text = seeded_matrix(1, 4, rng, 1.0);
    const ToyAttentionResult result = toy_cross_attention(image, text, 4, 0);
    for (int p = 0; p < 6; ++p) CHECK(result.map.at(p, 0) == 1.0);
}

TEST_CASE("toy_cross_attention: identical keys spread attention uniformly") {
    std::mt19937 rng(9);
    const Matrix image = seeded_matrix(5, 4, rng, 1.0);
    Matrix text(3, 4);
    for (int t = 0; t < 3; ++t) {
        for (int c = 0; c < 4; ++c) text.at(t, c) = 0.25 * (c + 1);
    }
    const ToyAttentionResult result = toy_cross_attention(image, text, 4, 7);
    for (int p = 0; p < 5; ++p) {
        for (int t = 0; t < 3; ++t)
            CHECK(result.map.at(p, t) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("toy_cross_attention: rows sum to one and runs are deterministic") {
    const ToyHarness harness = build_toy_harness({4, 4}, 5, 8, 2);
    const ToyAttentionResult a =
        toy_cross_attention(harness.image_features, harness.text_features, 8, 2);
    const ToyAttentionResult b =
        toy_cross_attention(harness.image_features, harness.text_features, 8, 2);
    CHECK_NOTHROW(check_normalized(a.map));
    CHECK(a.map == b.map);
    CHECK(a.output == b.output);
    CHECK_THROWS_AS(toy_cross_attention(harness.image_features, Matrix(5, 7), 8, 2), Error);
}

TEST_CASE("toy_cross_attention: seed-0 golden map reproduced bit for bit") {
    std::ifstream in(fixtures_dir() / "attention_seed0.txt");
    REQUIRE(in.good());
    int pixels = 0, tokens = 0;
    in >> pixels >> tokens;
    REQUIRE(pixels == 16);
    REQUIRE(tokens == 3);
    std::vector<double> expected;
    std::string hex;
    while (in >> hex) expected.push_back(std::strtod(hex.c_str(), nullptr));
    REQUIRE(expected.size() == static_cast<std::size_t>(pixels * tokens));

    const ToyHarness harness = build_toy_harness({4, 4}, 3, 8, 0);
    const ToyAttentionResult result =
        toy_cross_attention(harness.image_features, harness.text_features, 8, 0);
    REQUIRE(result.map.pixels == pixels);
    REQUIRE(result.map.tokens == tokens);
    for (std::size_t i = 0; i < expected.size(); ++i) {
        CAPTURE(i);
        CHECK(result.map.scores[i] == expected[i]);
    }
}

TEST_CASE("toy_cross_attention: independent reimplementation agrees") {
    const ToyHarness harness = build_toy_harness({4, 4}, 3, 8, 0);
    const ToyAttentionResult result =
        toy_cross_attention(harness.image_features, harness.text_features, 8, 0);

    // redo the projections with the documented draw scheme, then recompute
    // the map with reversed accumulation order and no max subtraction
    std::mt19937 rng(0);
    const double scale = 1.0 / std::sqrt(8.0);
    const Matrix wq = seeded_matrix(8, 8, rng, scale);
    const Matrix wk = seeded_matrix(8, 8, rng, scale);
    const Matrix q = matmul(harness.image_features, wq);
    const Matrix k = matmul(harness.text_features, wk);
    for (int p = 0; p < 16; ++p) {
        std::vector<double> logits(3);
        for (int t = 0; t < 3; ++t) {
            double dot = 0.0;
            for (int c = 7; c >= 0; --c) dot += q.at(p, c) * k.at(t, c);
            logits[t] = dot / std::sqrt(8.0);
        }
        const std::vector<double> oracle = softmax_row_oracle(logits);
        for (int t = 0; t < 3; ++t)
            CHECK(result.map.at(p, t) == doctest::Approx(oracle[t]).epsilon(1e-12));
    }
}

TEST_CASE("fit_encoder_supervised: input validation") {
    const EncoderWeights w = make_encoder_weights(3, {4}, 0, 0.5);
    CHECK_THROWS_AS(fit_encoder_supervised({}, w, 10, 0.1), Error);
    const std::vector<EncoderSample> samples = {{{0.1, 0.2, 0.3}, 0.5, -0.5, 2.0}};
    CHECK_THROWS_AS(fit_encoder_supervised(samples, w, 10, 0.0), Error);
    CHECK_THROWS_AS(fit_encoder_supervised(samples, w, 10, -0.1), Error);
}

TEST_CASE("fit_encoder_supervised: memorizes a single sample") {
    const EncoderWeights w0 = make_encoder_weights(6, {16, 16}, 1, 0.5);
    std::vector<double> feature = {0.4, -0.2, 0.7, 0.1, -0.9, 0.3};
    const std::vector<EncoderSample> samples = {{feature, 0.35, -0.15, 1.8}};
    const FitResult fit = fit_encoder_supervised(samples, w0, 5000, 0.05);
    REQUIRE(fit.loss_history.size() == 5001);
    CHECK(fit.loss_history.back() < 1e-4 * fit.loss_history.front());

    const SpatialDeltas out = knowledge_encoder_forward(feature, fit.weights);
    CHECK(out.dmu_x == doctest::Approx(0.35).epsilon(1e-2));
    CHECK(out.gamma == doctest::Approx(1.8).epsilon(1e-2));
}

TEST_CASE("fit_encoder_supervised: loss is non-increasing for a small rate") {
    const EncoderWeights w0 = make_encoder_weights(4, {8}, 2, 0.5);
    std::vector<EncoderSample> samples;
    std::mt19937 rng(13);
    for (int i = 0; i < 4; ++i) {
        EncoderSample s;
        for (int d = 0; d < 4; ++d)
            s.feature.push_back((static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0);
        s.target_dmu_x = 0.2 * i;
        s.target_dmu_y = -0.1 * i;
        s.target_gamma = 1.0 + 0.2 * i;
        samples.push_back(std::move(s));
    }
    const FitResult fit = fit_encoder_supervised(samples, w0, 500, 1e-3);
    for (std::size_t i = 1; i < fit.loss_history.size(); ++i)
        CHECK(fit.loss_history[i] <= fit.loss_history[i - 1] + 1e-12);
}

TEST_CASE("fit_encoder_supervised: diverging loss aborts with a diagnostic") {
    const EncoderWeights w0 = make_encoder_weights(3, {8}, 4, 1.0);
    const std::vector<EncoderSample> samples = {{{3.0, -2.0, 4.0}, 0.0, 0.0, 50.0}};
    CHECK_THROWS_WITH_AS(fit_encoder_supervised(samples, w0, 2000, 1e9),
                         doctest::Contains("non-finite"), Error);
}

TEST_CASE("encoder gradients match central finite differences") {
    std::mt19937 rng(77);
    const double h = 1e-5;
    for (int shape = 0; shape < 20; ++shape) {
        const int input_dim = 1 + static_cast<int>(rng() % 64);
        std::vector<int> hidden;
        for (unsigned l = 0; l < rng() % 3; ++l) hidden.push_back(1 + rng() % 24);
        const EncoderWeights w =
            make_encoder_weights(input_dim, hidden, 1000 + shape, 0.8);

        std::vector<EncoderSample> samples;
        const int n = 1 + static_cast<int>(rng() % 4);
        for (int i = 0; i < n; ++i) {
            EncoderSample s;
            for (int d = 0; d < input_dim; ++d)
                s.feature.push_back((static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0);
            s.target_dmu_x = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;
            s.target_dmu_y = (static_cast<double>(rng()) / 4294967296.0) * 2.0 - 1.0;
            s.target_gamma = 0.5 + static_cast<double>(rng()) / 4294967296.0;
            samples.push_back(std::move(s));
        }

        const std::vector<double> analytic = encoder_loss_gradient(samples, w);
        const std::vector<double> params = flatten_parameters(w);
        double max_rel_err = 0.0;
        for (std::size_t i = 0; i < params.size(); ++i) {
            std::vector<double> plus = params;
            std::vector<double> minus = params;
            plus[i] += h;
            minus[i] -= h;
            const double fd = (encoder_loss(samples, unflatten_parameters(w, plus)) -
                               encoder_loss(samples, unflatten_parameters(w, minus))) /
                              (2.0 * h);
            const double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
            max_rel_err = std::max(max_rel_err, std::abs(analytic[i] - fd) / denom);
        }
        CAPTURE(shape);
        CHECK(max_rel_err < 1e-4);
    }
}

TEST_CASE("text_feature: deterministic, word-dependent, dimension checked") {
    const std::vector<double> a = text_feature("a pink beaver", 8);
    const std::vector<double> b = text_feature("a pink beaver", 8);
    const std::vector<double> c = text_feature("a blue penguin", 8);
    CHECK(a == b);
    CHECK(a != c);
    CHECK(text_feature("", 4) == std::vector<double>(4, 0.0));
    CHECK_THROWS_AS(text_feature("x", 0), Error);
}

TEST_CASE("mask export: text grid and PGM header") {
    const Mask mask = eval_prior(init_position_prior(0, 1), {2, 3});
    const std::filesystem::path text_path =
        std::filesystem::temp_directory_path() / "charweave_mask.txt";
    const std::filesystem::path pgm_path =
        std::filesystem::temp_directory_path() / "charweave_mask.pgm";
    write_mask_text(mask, text_path);
    write_mask_pgm(mask, pgm_path);

    std::ifstream text_in(text_path);
    std::vector<double> parsed;
    double v = 0.0;
    while (text_in >> v) parsed.push_back(v);
    REQUIRE(parsed.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(parsed[i] == mask.values[i]);  // %.17g round-trips

    std::ifstream pgm_in(pgm_path, std::ios::binary);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    pgm_in >> magic >> w >> h >> maxval;
    CHECK(magic == "P5");
    CHECK(w == 3);
    CHECK(h == 2);
    CHECK(maxval == 255);
    std::filesystem::remove(text_path);
    std::filesystem::remove(pgm_path);
}
