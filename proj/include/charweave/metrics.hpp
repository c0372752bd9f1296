#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "charweave/character_graph.hpp"

namespace charweave {

/// Embedding classifier contract: a classification counts only when the best
/// similarity strictly exceeds the threshold (default 0.5).
class ClassifierProvider {
public:
    virtual ~ClassifierProvider() = default;
    virtual double similarity(std::span<const double> sample,
                              std::span<const double> character) const = 0;
    virtual double threshold() const { return 0.5; }
};

class CosineClassifier final : public ClassifierProvider {
public:
    explicit CosineClassifier(double threshold = 0.5) : threshold_(threshold) {}

    double similarity(std::span<const double> sample,
                      std::span<const double> character) const override;
    double threshold() const override { return threshold_; }

private:
    double threshold_;
};

struct FrameResult {
    std::set<std::string> required_ids;
    std::set<std::string> detected_ids;
};

/// |required intersection detected| / |required|. Requires a non-empty
/// required set.
double character_f1(const FrameResult& frame);

/// Fraction of frames whose required characters were all detected.
double frame_accuracy(const std::vector<FrameResult>& frames);

/// Id of the highest-similarity embedded character if that similarity
/// strictly exceeds the provider threshold, otherwise nothing. Ties break
/// toward the smallest id; characters without embeddings are skipped and a
/// graph with no embedded character at all is an error.
std::optional<std::string> classify(std::span<const double> sample_embedding,
                                    const CharacterGraph& graph,
                                    const ClassifierProvider& provider);

/// One frame of the results manifest.
struct ManifestFrame {
    std::string scene_id;
    std::vector<std::string> required_ids;
    std::vector<std::vector<double>> samples;  // embeddings
    std::optional<double> clip_t;
    std::optional<double> clip_i;
    std::optional<double> dino_i;
};

/// Manifest document: array of {scene_id, required_ids[], samples:
/// [{embedding}], clip_t?, clip_i?, dino_i?}. Errors name the field path.
std::vector<ManifestFrame> load_manifest(const std::filesystem::path& source);
std::vector<ManifestFrame> manifest_from_json(const std::string& text);

struct EvalReport {
    int frames = 0;
    double mean_character_f1 = 0.0;
    double frame_accuracy = 0.0;
    std::optional<double> mean_clip_t;
    std::optional<double> mean_clip_i;
    std::optional<double> mean_dino_i;
};

/// Classifies every sample of every frame against the graph and aggregates
/// Character-F1 (per-frame mean) and Frame-Accuracy, plus the means of any
/// precomputed clip_t/clip_i/dino_i fields.
EvalReport evaluate_manifest(const std::vector<ManifestFrame>& frames, const CharacterGraph& graph,
                             const ClassifierProvider& provider);

}  // namespace charweave
