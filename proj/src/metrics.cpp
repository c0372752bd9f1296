#include "charweave/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "charweave/errors.hpp"
#include "json_util.hpp"

namespace charweave {

double CosineClassifier::similarity(std::span<const double> sample,
                                    std::span<const double> character) const {
    if (sample.size() != character.size())
        throw Error("CosineClassifier: embedding dimensions differ (" +
                    std::to_string(sample.size()) + " vs " + std::to_string(character.size()) +
                    ")");
    double dot = 0.0, ns = 0.0, nc = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        dot += sample[i] * character[i];
        ns += sample[i] * sample[i];
        nc += character[i] * character[i];
    }
    if (ns <= 0.0 || nc <= 0.0) return 0.0;
    return dot / (std::sqrt(ns) * std::sqrt(nc));
}

double character_f1(const FrameResult& frame) {
    if (frame.required_ids.empty()) throw Error("character_f1: required id set is empty");
    std::size_t matched = 0;
    for (const std::string& id : frame.required_ids) matched += frame.detected_ids.count(id);
    return static_cast<double>(matched) / static_cast<double>(frame.required_ids.size());
}

double frame_accuracy(const std::vector<FrameResult>& frames) {
    if (frames.empty()) throw Error("frame_accuracy: no frames");
    std::size_t complete = 0;
    for (const FrameResult& frame : frames) {
        const bool all_present = std::all_of(
            frame.required_ids.begin(), frame.required_ids.end(),
            [&](const std::string& id) { return frame.detected_ids.count(id) > 0; });
        if (all_present) ++complete;
    }
    return static_cast<double>(complete) / static_cast<double>(frames.size());
}

std::optional<std::string> classify(std::span<const double> sample_embedding,
                                    const CharacterGraph& graph,
                                    const ClassifierProvider& provider) {
    const CharacterNode* best = nullptr;
    double best_similarity = 0.0;
    bool any_embedded = false;
    for (const CharacterNode& c : graph.characters) {
        if (!c.embedding) continue;
        any_embedded = true;
        const double s = provider.similarity(sample_embedding, *c.embedding);
        if (best == nullptr || s > best_similarity ||
            (s == best_similarity && c.id < best->id)) {
            best = &c;
            best_similarity = s;
        }
    }
    if (!any_embedded) throw Error("classify: no character in the graph carries an embedding");
    if (best_similarity > provider.threshold()) return best->id;
    return std::nullopt;
}

namespace {

using jsonutil::ordered_json;

ManifestFrame frame_from_json(const ordered_json& j, const std::string& path) {
    jsonutil::expect_object(j, path);
    jsonutil::reject_unknown_keys(
        j, {"scene_id", "required_ids", "samples", "clip_t", "clip_i", "dino_i"}, path);
    ManifestFrame frame;
    frame.scene_id = jsonutil::get_string(jsonutil::require_key(j, "scene_id", path),
                                          path + ".scene_id");
    frame.required_ids = jsonutil::get_string_array(
        jsonutil::require_key(j, "required_ids", path), path + ".required_ids");
    const ordered_json& samples = jsonutil::require_key(j, "samples", path);
    jsonutil::expect_array(samples, path + ".samples");
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string sample_path = path + ".samples[" + std::to_string(i) + "]";
        jsonutil::expect_object(samples[i], sample_path);
        jsonutil::reject_unknown_keys(samples[i], {"embedding"}, sample_path);
        frame.samples.push_back(jsonutil::get_number_array(
            jsonutil::require_key(samples[i], "embedding", sample_path),
            sample_path + ".embedding"));
    }
    if (j.contains("clip_t")) frame.clip_t = jsonutil::get_number(j["clip_t"], path + ".clip_t");
    if (j.contains("clip_i")) frame.clip_i = jsonutil::get_number(j["clip_i"], path + ".clip_i");
    if (j.contains("dino_i")) frame.dino_i = jsonutil::get_number(j["dino_i"], path + ".dino_i");
    return frame;
}

}  // namespace

std::vector<ManifestFrame> manifest_from_json(const std::string& text) {
    const ordered_json j = jsonutil::parse_document(text, "results manifest");
    jsonutil::expect_array(j, "$");
    std::vector<ManifestFrame> frames;
    for (std::size_t i = 0; i < j.size(); ++i) {
        frames.push_back(frame_from_json(j[i], "$[" + std::to_string(i) + "]"));
    }
    return frames;
}

std::vector<ManifestFrame> load_manifest(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw Error("load_manifest: cannot open " + source.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return manifest_from_json(buffer.str());
}

EvalReport evaluate_manifest(const std::vector<ManifestFrame>& frames, const CharacterGraph& graph,
                             const ClassifierProvider& provider) {
    if (frames.empty()) throw Error("evaluate_manifest: no frames");

    EvalReport report;
    report.frames = static_cast<int>(frames.size());

    std::vector<FrameResult> results;
    double clip_t_sum = 0.0, clip_i_sum = 0.0, dino_i_sum = 0.0;
    int clip_t_n = 0, clip_i_n = 0, dino_i_n = 0;
    for (const ManifestFrame& frame : frames) {
        if (frame.required_ids.empty())
            throw Error("evaluate_manifest: frame \"" + frame.scene_id +
                        "\" lists no required characters");
        FrameResult r;
        r.required_ids.insert(frame.required_ids.begin(), frame.required_ids.end());
        for (const std::vector<double>& sample : frame.samples) {
            if (const std::optional<std::string> id = classify(sample, graph, provider))
                r.detected_ids.insert(*id);
        }
        results.push_back(std::move(r));
        if (frame.clip_t) { clip_t_sum += *frame.clip_t; ++clip_t_n; }
        if (frame.clip_i) { clip_i_sum += *frame.clip_i; ++clip_i_n; }
        if (frame.dino_i) { dino_i_sum += *frame.dino_i; ++dino_i_n; }
    }

    double f1_sum = 0.0;
    for (const FrameResult& r : results) f1_sum += character_f1(r);
    report.mean_character_f1 = f1_sum / static_cast<double>(results.size());
    report.frame_accuracy = frame_accuracy(results);
    if (clip_t_n > 0) report.mean_clip_t = clip_t_sum / clip_t_n;
    if (clip_i_n > 0) report.mean_clip_i = clip_i_sum / clip_i_n;
    if (dino_i_n > 0) report.mean_dino_i = dino_i_sum / dino_i_n;
    return report;
}

}  // namespace charweave
