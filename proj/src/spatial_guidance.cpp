#include "charweave/spatial_guidance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "charweave/errors.hpp"

namespace charweave {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double unit_draw(std::mt19937& rng) {
    return static_cast<double>(rng()) / 4294967296.0 * 2.0 - 1.0;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 1469598103934665603ull;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    return hash;
}

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw Error("matmul: dimension mismatch");
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    }
    return out;
}

Matrix seeded_matrix(int rows, int cols, std::mt19937& rng, double scale) {
    Matrix m(rows, cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) m.at(r, c) = unit_draw(rng) * scale;
    }
    return m;
}

double Mask::max_value() const {
    double best = 0.0;
    for (double v : values) best = std::max(best, v);
    return best;
}

PositionPrior::PositionPrior(double mu_x, double mu_y, const std::array<double, 4>& covariance)
    : mu_x_(mu_x), mu_y_(mu_y), cov_(covariance) {
    const double scale = std::max({1.0, std::abs(cov_[1]), std::abs(cov_[2])});
    if (std::abs(cov_[1] - cov_[2]) > 1e-12 * scale)
        throw Error("PositionPrior: covariance must be symmetric");
    const double det = cov_[0] * cov_[3] - cov_[1] * cov_[2];
    if (!(cov_[0] > 0.0) || !(det > 0.0))
        throw Error("PositionPrior: covariance must be positive definite");
}

PositionPrior init_position_prior(int index, int count) {
    if (count < 1) throw Error("init_position_prior: character count must be >= 1");
    if (index < 0 || index >= count)
        throw Error("init_position_prior: index " + std::to_string(index) +
                    " out of range for count " + std::to_string(count));
    const double mu_x =
        count == 1 ? 0.0 : -1.0 + static_cast<double>(index) * 2.0 / (count - 1);
    return PositionPrior(mu_x, 0.0, {1.0, 0.0, 0.0, 1.0});
}

Mask eval_prior(const PositionPrior& prior, GridShape grid, Extent extent) {
    if (grid.height < 1 || grid.width < 1) throw Error("eval_prior: grid dimensions must be >= 1");
    if (!(extent.x_max > extent.x_min) || !(extent.y_max > extent.y_min))
        throw Error("eval_prior: extent must have positive area");

    const std::array<double, 4>& cov = prior.cov();
    const double det = cov[0] * cov[3] - cov[1] * cov[2];
    const double inv00 = cov[3] / det;
    const double inv01 = -cov[1] / det;
    const double inv10 = -cov[2] / det;
    const double inv11 = cov[0] / det;
    const double norm = 1.0 / (kTwoPi * std::sqrt(det));

    Mask mask;
    mask.height = grid.height;
    mask.width = grid.width;
    mask.values.resize(static_cast<std::size_t>(grid.height) * grid.width);
    const double cell_w = (extent.x_max - extent.x_min) / grid.width;
    const double cell_h = (extent.y_max - extent.y_min) / grid.height;
    for (int y = 0; y < grid.height; ++y) {
        const double py = extent.y_min + (y + 0.5) * cell_h;
        const double dy = py - prior.mu_y();
        for (int x = 0; x < grid.width; ++x) {
            const double px = extent.x_min + (x + 0.5) * cell_w;
            const double dx = px - prior.mu_x();
            const double quad = dx * (inv00 * dx + inv01 * dy) + dy * (inv10 * dx + inv11 * dy);
            mask.values[static_cast<std::size_t>(y) * grid.width + x] =
                norm * std::exp(-0.5 * quad);
        }
    }
    return mask;
}

PositionPrior enhance_prior(const PositionPrior& prior, const SpatialDeltas& deltas) {
    if (!(deltas.gamma > 0.0)) throw Error("enhance_prior: gamma must be positive");
    const std::array<double, 4>& cov = prior.cov();
    return PositionPrior(prior.mu_x() + deltas.dmu_x, prior.mu_y() + deltas.dmu_y,
                         {deltas.gamma * cov[0], deltas.gamma * cov[1], deltas.gamma * cov[2],
                          deltas.gamma * cov[3]});
}

double guidance_scale(int timestep, double alpha) {
    if (timestep < 0) throw Error("guidance_scale: timestep must be >= 0");
    return alpha * (std::log(static_cast<double>(timestep) + 1.0) + 1.0);
}

int EncoderWeights::input_dim() const {
    if (layers.empty()) return 0;
    return layers.front().weights.cols;
}

std::size_t EncoderWeights::parameter_count() const {
    std::size_t n = 0;
    for (const DenseLayer& layer : layers) n += layer.weights.data.size() + layer.bias.size();
    return n;
}

EncoderWeights make_encoder_weights(int input_dim, const std::vector<int>& hidden_dims,
                                    std::uint32_t seed, double init_scale) {
    if (input_dim < 1) throw Error("make_encoder_weights: input_dim must be >= 1");
    for (int h : hidden_dims) {
        if (h < 1) throw Error("make_encoder_weights: hidden dims must be >= 1");
    }
    std::vector<int> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(3);

    std::mt19937 rng(seed);
    EncoderWeights w;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        const double scale = init_scale / std::sqrt(static_cast<double>(dims[l]));
        layer.weights = seeded_matrix(dims[l + 1], dims[l], rng, scale);
        layer.bias.assign(dims[l + 1], 0.0);
        w.layers.push_back(std::move(layer));
    }
    return w;
}

namespace {

void check_encoder_shape(const EncoderWeights& w) {
    if (w.layers.empty()) throw Error("encoder: no layers");
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const DenseLayer& layer = w.layers[l];
        if (layer.weights.rows != static_cast<int>(layer.bias.size()))
            throw Error("encoder: bias length mismatch in layer " + std::to_string(l));
        if (l + 1 < w.layers.size() &&
            w.layers[l + 1].weights.cols != layer.weights.rows)
            throw Error("encoder: layer dimensions do not chain at layer " + std::to_string(l));
    }
    if (w.layers.back().weights.rows != 3)
        throw Error("encoder: output layer must have 3 outputs");
}

// Forward pass keeping the activations of every layer (index 0 is the
// input); the last entry holds the raw linear outputs.
std::vector<std::vector<double>> encoder_activations(std::span<const double> feature,
                                                     const EncoderWeights& w) {
    if (static_cast<int>(feature.size()) != w.layers.front().weights.cols)
        throw Error("encoder: feature length " + std::to_string(feature.size()) +
                    " does not match input dim " +
                    std::to_string(w.layers.front().weights.cols));
    std::vector<std::vector<double>> acts;
    acts.emplace_back(feature.begin(), feature.end());
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const DenseLayer& layer = w.layers[l];
        const std::vector<double>& x = acts.back();
        std::vector<double> z(layer.bias);
        for (int r = 0; r < layer.weights.rows; ++r) {
            double acc = z[r];
            for (int c = 0; c < layer.weights.cols; ++c) acc += layer.weights.at(r, c) * x[c];
            z[r] = acc;
        }
        if (l + 1 < w.layers.size()) {
            for (double& v : z) v = std::tanh(v);
        }
        acts.push_back(std::move(z));
    }
    return acts;
}

}  // namespace

SpatialDeltas knowledge_encoder_forward(std::span<const double> feature, const EncoderWeights& w) {
    check_encoder_shape(w);
    const std::vector<std::vector<double>> acts = encoder_activations(feature, w);
    const std::vector<double>& raw = acts.back();
    return {raw[0], raw[1], std::exp(raw[2])};
}

double encoder_loss(const std::vector<EncoderSample>& samples, const EncoderWeights& w) {
    if (samples.empty()) throw Error("encoder_loss: no samples");
    check_encoder_shape(w);
    double total = 0.0;
    for (const EncoderSample& s : samples) {
        const SpatialDeltas out = knowledge_encoder_forward(s.feature, w);
        const double r0 = out.dmu_x - s.target_dmu_x;
        const double r1 = out.dmu_y - s.target_dmu_y;
        const double r2 = out.gamma - s.target_gamma;
        total += r0 * r0 + r1 * r1 + r2 * r2;
    }
    return total / static_cast<double>(samples.size());
}

std::vector<double> flatten_parameters(const EncoderWeights& w) {
    std::vector<double> params;
    params.reserve(w.parameter_count());
    for (const DenseLayer& layer : w.layers) {
        params.insert(params.end(), layer.weights.data.begin(), layer.weights.data.end());
        params.insert(params.end(), layer.bias.begin(), layer.bias.end());
    }
    return params;
}

EncoderWeights unflatten_parameters(const EncoderWeights& shape, std::span<const double> params) {
    if (params.size() != shape.parameter_count())
        throw Error("unflatten_parameters: parameter count mismatch");
    EncoderWeights w = shape;
    std::size_t offset = 0;
    for (DenseLayer& layer : w.layers) {
        std::copy_n(params.begin() + offset, layer.weights.data.size(),
                    layer.weights.data.begin());
        offset += layer.weights.data.size();
        std::copy_n(params.begin() + offset, layer.bias.size(), layer.bias.begin());
        offset += layer.bias.size();
    }
    return w;
}

std::vector<double> encoder_loss_gradient(const std::vector<EncoderSample>& samples,
                                          const EncoderWeights& w, double* loss_out) {
    if (samples.empty()) throw Error("encoder_loss_gradient: no samples");
    check_encoder_shape(w);

    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    for (const DenseLayer& layer : w.layers) {
        weight_grads.emplace_back(layer.weights.rows, layer.weights.cols);
        bias_grads.emplace_back(layer.bias.size(), 0.0);
    }

    double total_loss = 0.0;
    for (const EncoderSample& s : samples) {
        const std::vector<std::vector<double>> acts = encoder_activations(s.feature, w);
        const std::vector<double>& raw = acts.back();
        const double gamma = std::exp(raw[2]);
        const double r0 = raw[0] - s.target_dmu_x;
        const double r1 = raw[1] - s.target_dmu_y;
        const double r2 = gamma - s.target_gamma;
        total_loss += r0 * r0 + r1 * r1 + r2 * r2;

        // d(loss)/d(raw outputs); gamma = exp(raw[2]) chains one extra factor
        std::vector<double> delta = {2.0 * r0, 2.0 * r1, 2.0 * r2 * gamma};
        for (int l = static_cast<int>(w.layers.size()) - 1; l >= 0; --l) {
            const DenseLayer& layer = w.layers[l];
            const std::vector<double>& input = acts[l];
            for (int r = 0; r < layer.weights.rows; ++r) {
                bias_grads[l][r] += delta[r];
                for (int c = 0; c < layer.weights.cols; ++c)
                    weight_grads[l].at(r, c) += delta[r] * input[c];
            }
            if (l == 0) break;
            std::vector<double> upstream(layer.weights.cols, 0.0);
            for (int c = 0; c < layer.weights.cols; ++c) {
                double acc = 0.0;
                for (int r = 0; r < layer.weights.rows; ++r)
                    acc += layer.weights.at(r, c) * delta[r];
                // input[c] is tanh(z), so tanh' = 1 - input^2
                upstream[c] = acc * (1.0 - input[c] * input[c]);
            }
            delta = std::move(upstream);
        }
    }

    const double inv_n = 1.0 / static_cast<double>(samples.size());
    std::vector<double> grad;
    grad.reserve(w.parameter_count());
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        for (double v : weight_grads[l].data) grad.push_back(v * inv_n);
        for (double v : bias_grads[l]) grad.push_back(v * inv_n);
    }
    if (loss_out != nullptr) *loss_out = total_loss * inv_n;
    return grad;
}

FitResult fit_encoder_supervised(const std::vector<EncoderSample>& samples, EncoderWeights initial,
                                 int steps, double learning_rate) {
    if (samples.empty()) throw Error("fit_encoder_supervised: no samples");
    if (steps < 0) throw Error("fit_encoder_supervised: steps must be >= 0");
    if (!(learning_rate > 0.0)) throw Error("fit_encoder_supervised: learning rate must be > 0");
    check_encoder_shape(initial);

    FitResult result;
    result.weights = std::move(initial);
    for (int step = 0; step < steps; ++step) {
        double loss = 0.0;
        std::vector<double> grad = encoder_loss_gradient(samples, result.weights, &loss);
        if (!std::isfinite(loss))
            throw Error("fit_encoder_supervised: loss became non-finite at step " +
                        std::to_string(step) + "; lower the learning rate");
        result.loss_history.push_back(loss);
        std::vector<double> params = flatten_parameters(result.weights);
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grad[i];
        result.weights = unflatten_parameters(result.weights, params);
    }
    const double final_loss = encoder_loss(samples, result.weights);
    if (!std::isfinite(final_loss))
        throw Error("fit_encoder_supervised: loss became non-finite after the final step");
    result.loss_history.push_back(final_loss);
    return result;
}

AttentionTensor softmax_rows(const AttentionTensor& logits) {
    AttentionTensor out = logits;
    out.normalized = true;
    for (int p = 0; p < out.pixels; ++p) {
        double row_max = out.at(p, 0);
        for (int t = 1; t < out.tokens; ++t) row_max = std::max(row_max, out.at(p, t));
        double sum = 0.0;
        for (int t = 0; t < out.tokens; ++t) {
            const double e = std::exp(out.at(p, t) - row_max);
            out.at(p, t) = e;
            sum += e;
        }
        for (int t = 0; t < out.tokens; ++t) out.at(p, t) /= sum;
    }
    return out;
}

void check_normalized(const AttentionTensor& map, double tolerance) {
    if (!map.normalized)
        throw InvariantViolation("attention tensor is not marked as normalized");
    for (int p = 0; p < map.pixels; ++p) {
        double sum = 0.0;
        for (int t = 0; t < map.tokens; ++t) sum += map.at(p, t);
        if (std::abs(sum - 1.0) > tolerance)
            throw InvariantViolation("attention row " + std::to_string(p) + " sums to " +
                                     std::to_string(sum));
    }
}

double beta_threshold(const Mask& prior_mask, double beta_fraction) {
    return beta_fraction * prior_mask.max_value();
}

AttentionTensor apply_guidance(const AttentionTensor& attention, const Mask& prior_mask,
                               TokenSpan owned_tokens, int timestep,
                               const GuidanceConfig& config) {
    if (prior_mask.height != config.grid.height || prior_mask.width != config.grid.width)
        throw Error("apply_guidance: prior mask does not match the configured grid");
    if (attention.pixels != config.grid.height * config.grid.width)
        throw Error("apply_guidance: attention pixel count does not match the grid");
    if (owned_tokens.begin < 0 || owned_tokens.end > attention.tokens ||
        owned_tokens.begin > owned_tokens.end)
        throw Error("apply_guidance: ownership span out of range");
    if (config.mode == GuidanceMode::logit && attention.normalized)
        throw Error("apply_guidance: logit mode requires pre-softmax scores");
    if (config.mode == GuidanceMode::post_softmax_renorm && !attention.normalized)
        throw Error("apply_guidance: renorm mode requires a normalized map");

    const double s = guidance_scale(timestep, config.alpha);
    AttentionTensor out = attention;
    if (s == 0.0 || owned_tokens.begin == owned_tokens.end) return out;

    const double beta = beta_threshold(prior_mask, config.beta_fraction);
    for (int p = 0; p < out.pixels; ++p) {
        const double delta = prior_mask.values[p] >= beta ? s : -s;
        for (int t = owned_tokens.begin; t < owned_tokens.end; ++t) out.at(p, t) += delta;
    }

    if (config.mode == GuidanceMode::post_softmax_renorm) {
        for (int p = 0; p < out.pixels; ++p) {
            double sum = 0.0;
            for (int t = 0; t < out.tokens; ++t) {
                const double v = std::max(0.0, out.at(p, t));
                out.at(p, t) = v;
                sum += v;
            }
            if (sum > 0.0) {
                for (int t = 0; t < out.tokens; ++t) out.at(p, t) /= sum;
            } else {
                const double uniform = 1.0 / out.tokens;
                for (int t = 0; t < out.tokens; ++t) out.at(p, t) = uniform;
            }
        }
        check_normalized(out);
    }
    return out;
}

ToyAttentionResult toy_cross_attention(const Matrix& image_features, const Matrix& text_features,
                                       int latent_dim, std::uint32_t seed) {
    if (image_features.cols != text_features.cols)
        throw Error("toy_cross_attention: image and text feature dims differ");
    if (image_features.rows < 1 || text_features.rows < 1)
        throw Error("toy_cross_attention: empty feature matrix");
    if (latent_dim < 1) throw Error("toy_cross_attention: latent_dim must be >= 1");

    const int feature_dim = image_features.cols;
    std::mt19937 rng(seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    const Matrix wq = seeded_matrix(feature_dim, latent_dim, rng, scale);
    const Matrix wk = seeded_matrix(feature_dim, latent_dim, rng, scale);
    const Matrix wv = seeded_matrix(feature_dim, latent_dim, rng, scale);

    const Matrix q = matmul(image_features, wq);
    const Matrix k = matmul(text_features, wk);
    const Matrix v = matmul(text_features, wv);

    ToyAttentionResult result;
    result.scores.pixels = image_features.rows;
    result.scores.tokens = text_features.rows;
    result.scores.normalized = false;
    result.scores.scores.resize(static_cast<std::size_t>(result.scores.pixels) *
                                result.scores.tokens);
    const double sqrt_d = std::sqrt(static_cast<double>(latent_dim));
    for (int p = 0; p < result.scores.pixels; ++p) {
        for (int t = 0; t < result.scores.tokens; ++t) {
            double dot = 0.0;
            for (int c = 0; c < latent_dim; ++c) dot += q.at(p, c) * k.at(t, c);
            result.scores.at(p, t) = dot / sqrt_d;
        }
    }
    result.map = softmax_rows(result.scores);

    result.output = Matrix(result.map.pixels, latent_dim);
    for (int p = 0; p < result.map.pixels; ++p) {
        for (int c = 0; c < latent_dim; ++c) {
            double acc = 0.0;
            for (int t = 0; t < result.map.tokens; ++t) acc += result.map.at(p, t) * v.at(t, c);
            result.output.at(p, c) = acc;
        }
    }
    return result;
}

ToyHarness build_toy_harness(GridShape grid, int tokens, int feature_dim, std::uint32_t seed) {
    if (tokens < 1) throw Error("build_toy_harness: token count must be >= 1");
    if (feature_dim < 1) throw Error("build_toy_harness: feature dim must be >= 1");
    std::mt19937 rng(seed + 1);
    ToyHarness harness;
    harness.image_features = seeded_matrix(grid.height * grid.width, feature_dim, rng, 1.0);
    harness.text_features = seeded_matrix(tokens, feature_dim, rng, 1.0);
    return harness;
}

std::vector<double> text_feature(const std::string& text, int dim) {
    if (dim < 1) throw Error("text_feature: dim must be >= 1");
    std::istringstream in(text);
    std::vector<double> feature(dim, 0.0);
    std::string word;
    int words = 0;
    while (in >> word) {
        ++words;
        const std::uint64_t h = fnv1a64(word);
        for (int k = 0; k < dim; ++k) {
            const std::uint64_t mixed = splitmix64(h + static_cast<std::uint64_t>(k));
            // top 53 bits -> [0,1), then to [-1,1)
            const double u = static_cast<double>(mixed >> 11) / 9007199254740992.0;
            feature[k] += u * 2.0 - 1.0;
        }
    }
    if (words > 0) {
        for (double& v : feature) v /= static_cast<double>(words);
    }
    return feature;
}

void write_mask_text(const Mask& mask, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("write_mask_text: cannot open " + path.string());
    char buffer[64];
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            std::snprintf(buffer, sizeof(buffer), "%.17g", mask.at(y, x));
            if (x > 0) out << ' ';
            out << buffer;
        }
        out << '\n';
    }
    if (!out) throw Error("write_mask_text: write to " + path.string() + " failed");
}

void write_mask_pgm(const Mask& mask, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("write_mask_pgm: cannot open " + path.string());
    out << "P5\n" << mask.width << " " << mask.height << "\n255\n";
    const double max = mask.max_value();
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            const double v = max > 0.0 ? mask.at(y, x) / max : 0.0;
            const int level = static_cast<int>(v * 255.0 + 0.5);
            out.put(static_cast<char>(std::clamp(level, 0, 255)));
        }
    }
    if (!out) throw Error("write_mask_pgm: write to " + path.string() + " failed");
}

}  // namespace charweave
