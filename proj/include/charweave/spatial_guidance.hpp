#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace charweave {

struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    bool operator==(const Matrix&) const = default;
};

Matrix matmul(const Matrix& a, const Matrix& b);

/// Fills a matrix with deterministic draws: each entry is
/// (u32 / 2^32 * 2 - 1) * scale, row-major, one draw per entry.
Matrix seeded_matrix(int rows, int cols, std::mt19937& rng, double scale);

struct GridShape {
    int height = 16;
    int width = 16;

    bool operator==(const GridShape&) const = default;
};

/// Coordinate box the grid's pixel centers map onto. The default leaves
/// margin so priors centered at x = +-1 are not clipped at the borders.
struct Extent {
    double x_min = -1.5;
    double x_max = 1.5;
    double y_min = -1.5;
    double y_max = 1.5;

    bool operator==(const Extent&) const = default;
};

struct Mask {
    int height = 0;
    int width = 0;
    std::vector<double> values;  // row-major

    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
    double max_value() const;

    bool operator==(const Mask&) const = default;
};

/// 2-D Gaussian position prior. The covariance must be symmetric positive
/// definite; the constructor checks this.
class PositionPrior {
public:
    PositionPrior(double mu_x, double mu_y, const std::array<double, 4>& covariance);

    double mu_x() const { return mu_x_; }
    double mu_y() const { return mu_y_; }
    const std::array<double, 4>& cov() const { return cov_; }

private:
    double mu_x_;
    double mu_y_;
    std::array<double, 4> cov_;  // row-major 2x2
};

/// Initial prior for the j-th of n characters: evenly distributed
/// horizontally with mu_x = -1 + j*2/(n-1), mu_y = 0, identity covariance.
/// A single character is centered at mu_x = 0.
PositionPrior init_position_prior(int index, int count);

/// Gaussian density 1/(2*pi*sqrt(|S|)) * exp(-1/2 d^T S^-1 d) sampled at the
/// pixel centers of `grid` mapped onto `extent`.
Mask eval_prior(const PositionPrior& prior, GridShape grid, Extent extent = {});

struct SpatialDeltas {
    double dmu_x = 0.0;
    double dmu_y = 0.0;
    double gamma = 1.0;  // covariance scale, always > 0
};

/// Shifted/scaled prior: mu' = mu + dmu, S' = gamma * S.
PositionPrior enhance_prior(const PositionPrior& prior, const SpatialDeltas& deltas);

/// Time-aware guidance strength s(t) = alpha * (ln(t+1) + 1); strictly
/// increasing in t with s(0) = alpha.
double guidance_scale(int timestep, double alpha);

struct DenseLayer {
    Matrix weights;  // out x in
    std::vector<double> bias;
};

/// Small feed-forward network mapping a text feature to (dmu_x, dmu_y,
/// gamma). Hidden layers use tanh; the raw third output passes through exp
/// so gamma stays positive.
struct EncoderWeights {
    std::vector<DenseLayer> layers;

    int input_dim() const;
    std::size_t parameter_count() const;
};

/// Weight entries are seeded draws scaled by init_scale/sqrt(fan_in); biases
/// start at zero. init_scale = 0 gives the identity refinement (0, 0, 1).
EncoderWeights make_encoder_weights(int input_dim, const std::vector<int>& hidden_dims,
                                    std::uint32_t seed, double init_scale);

SpatialDeltas knowledge_encoder_forward(std::span<const double> feature, const EncoderWeights& w);

struct EncoderSample {
    std::vector<double> feature;
    double target_dmu_x = 0.0;
    double target_dmu_y = 0.0;
    double target_gamma = 1.0;
};

/// Mean squared error of the encoder outputs against the sample targets.
double encoder_loss(const std::vector<EncoderSample>& samples, const EncoderWeights& w);

/// Analytic gradient of encoder_loss, flattened layer by layer (weights
/// row-major, then bias). Optionally reports the loss of the same pass.
std::vector<double> encoder_loss_gradient(const std::vector<EncoderSample>& samples,
                                          const EncoderWeights& w, double* loss_out = nullptr);

std::vector<double> flatten_parameters(const EncoderWeights& w);
EncoderWeights unflatten_parameters(const EncoderWeights& shape, std::span<const double> params);

struct FitResult {
    EncoderWeights weights;
    std::vector<double> loss_history;  // loss before each step, then final
};

/// Full-batch gradient descent on the squared error. Aborts with a
/// diagnostic when the loss turns non-finite.
FitResult fit_encoder_supervised(const std::vector<EncoderSample>& samples, EncoderWeights initial,
                                 int steps, double learning_rate);

enum class GuidanceMode {
    logit,                // edit pre-softmax scores, caller softmaxes after
    post_softmax_renorm,  // edit the normalized map, clamp at 0, renormalize
};

struct GuidanceConfig {
    double alpha = 2.5;
    double beta_fraction = 0.85;
    GuidanceMode mode = GuidanceMode::logit;
    GridShape grid;
    Extent extent;
};

/// Cross-attention scores, pixels x tokens. `normalized` marks whether the
/// rows are a softmaxed map (each summing to 1) or raw logits.
struct AttentionTensor {
    int pixels = 0;
    int tokens = 0;
    bool normalized = false;
    std::vector<double> scores;  // row-major

    double& at(int pixel, int token) {
        return scores[static_cast<std::size_t>(pixel) * tokens + token];
    }
    double at(int pixel, int token) const {
        return scores[static_cast<std::size_t>(pixel) * tokens + token];
    }

    bool operator==(const AttentionTensor&) const = default;
};

/// Row-wise softmax (max-subtracted).
AttentionTensor softmax_rows(const AttentionTensor& logits);

/// Throws InvariantViolation unless every row sums to 1 within `tolerance`.
void check_normalized(const AttentionTensor& map, double tolerance = 1e-6);

struct TokenSpan {
    int begin = 0;
    int end = 0;  // half-open
};

/// Threshold separating a character's region from the rest of the grid:
/// beta = fraction * max(mask).
double beta_threshold(const Mask& prior_mask, double beta_fraction);

/// Adds s(t) to every owned token at pixels where the prior reaches its beta
/// threshold and subtracts s(t) elsewhere. Unowned token columns keep their
/// values. Logit mode requires (and returns) pre-softmax scores so edits for
/// several characters can be chained before one final softmax; renorm mode
/// requires a normalized map and renormalizes rows after clamping at zero.
AttentionTensor apply_guidance(const AttentionTensor& attention, const Mask& prior_mask,
                               TokenSpan owned_tokens, int timestep,
                               const GuidanceConfig& config);

struct ToyAttentionResult {
    AttentionTensor scores;  // pre-softmax logits
    AttentionTensor map;     // softmaxed, rows sum to 1
    Matrix output;           // map * V
};

/// Single cross-attention layer with seeded query/key/value projections:
/// map = softmax(Q K^T / sqrt(d)), output = map * V. Deterministic for a
/// fixed seed.
ToyAttentionResult toy_cross_attention(const Matrix& image_features, const Matrix& text_features,
                                       int latent_dim, std::uint32_t seed);

/// Deterministic demo inputs: image features (pixels x dim) and text
/// features (tokens x dim) drawn from seed+1 so they differ from the
/// projection draws of toy_cross_attention(seed).
struct ToyHarness {
    Matrix image_features;
    Matrix text_features;
};
ToyHarness build_toy_harness(GridShape grid, int tokens, int feature_dim, std::uint32_t seed);

/// Hash-based stand-in for a text encoder: deterministic, platform
/// independent, one value per dimension derived from the words of `text`.
std::vector<double> text_feature(const std::string& text, int dim);

/// Plain-text mask export: one row per line, space-separated, row-major.
void write_mask_text(const Mask& mask, const std::filesystem::path& path);

/// 8-bit grayscale export (binary PGM), max-normalized.
void write_mask_pgm(const Mask& mask, const std::filesystem::path& path);

}  // namespace charweave
