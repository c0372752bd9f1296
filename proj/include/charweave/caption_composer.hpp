#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "charweave/character_graph.hpp"
#include "charweave/scene_parser.hpp"

namespace charweave {

/// Scores how well a coarse scene label names a character. Scores are in
/// [0,1], deterministic for fixed inputs, and exactly 1.0 when the label
/// equals one of the character's aliases (or its lowercased display name).
class SimilarityProvider {
public:
    virtual ~SimilarityProvider() = default;
    virtual double score(const std::string& label, const CharacterNode& character) const = 0;

protected:
    static bool exact_label_match(const std::string& label, const CharacterNode& character);
};

/// Default text-only matcher: exact alias 1.0, otherwise Jaccard overlap
/// between the label's words and the character's alias+attribute words.
class LexicalSimilarity final : public SimilarityProvider {
public:
    double score(const std::string& label, const CharacterNode& character) const override;
};

/// Cosine matcher for characters that carry embeddings, mapped to [0,1] via
/// (1+cos)/2. Labels are embedded through the supplied function; when either
/// side has no embedding the lexical fallback is used.
class EmbeddingSimilarity final : public SimilarityProvider {
public:
    using LabelEmbedder = std::function<std::vector<double>(const std::string&)>;

    explicit EmbeddingSimilarity(LabelEmbedder embedder) : embedder_(std::move(embedder)) {}

    double score(const std::string& label, const CharacterNode& character) const override;

private:
    LabelEmbedder embedder_;
    LexicalSimilarity fallback_;
};

/// Highest-scoring character id for the label; ties break toward the
/// lexicographically smallest id. Throws NoMatchError when the best score
/// falls below `floor`, so unknown entities can pass through unenhanced.
std::string match_character(const std::string& coarse_label, const CharacterGraph& graph,
                            const SimilarityProvider& sim, double floor = 0.2);

/// Canonical appearance description. Single-word attributes and the first
/// alias form the species phrase ("Petty, a female penguin"); remaining
/// attributes attach through the fixed connector order "with", "and", "in".
/// A character without aliases is described as name-plus-connectors and a
/// character without attributes is just its display name.
std::string compose_character_description(const CharacterNode& character);

/// Event text: relations with the same predicate (and object) merge into one
/// clause whose subjects join with "and" plus a trailing "together"; clauses
/// join with ", ". `entity_names[i]` names entity i (matched display name or
/// raw head). A self-referential object is omitted.
std::string compose_event_description(const std::vector<Relation>& relations,
                                       const std::vector<std::string>& entity_names);

struct OwnershipSpan {
    int start_token = 0;  // whitespace-token index in the flat caption
    int end_token = 0;    // half-open
    std::optional<std::string> character_id;  // empty for style/event tokens

    bool operator==(const OwnershipSpan&) const = default;
};

/// The composed scene caption [style, event, character descriptions...]
/// flattened with ", " between segments. `token_ownership` covers every
/// token of the flat caption in order.
struct SceneCaption {
    std::string style;
    std::string event_text;
    std::vector<std::pair<std::string, std::string>> character_descriptions;  // (id, text)
    std::string flat_caption;
    std::vector<OwnershipSpan> token_ownership;
    std::vector<std::string> warnings;

    bool operator==(const SceneCaption&) const = default;
};

struct ComposeOptions {
    double match_floor = 0.2;
    const Lexicon* lexicon = nullptr;  // defaults to Lexicon::builtin()
};

/// Full pipeline: parse the scene text, match each entity against the graph,
/// build the event description and one description per matched character
/// (first-mention order, deduplicated), then flatten and record ownership.
/// Entities that match no character become warnings; if nothing matches the
/// raw scene text is kept as the event segment.
SceneCaption compose_scene_caption(const std::string& scene_text, const CharacterGraph& graph,
                                   const SimilarityProvider& sim,
                                   const ComposeOptions& options = {});

std::vector<std::string> split_whitespace(const std::string& text);

}  // namespace charweave
