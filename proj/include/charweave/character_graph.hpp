#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "charweave/scene_parser.hpp"

namespace charweave {

struct CharacterNode {
    std::string id;
    std::string display_name;
    std::vector<std::string> aliases;  // lowercase coarse labels
    std::string frontal_caption;
    std::vector<std::string> attributes;  // deduplicated, first-seen order
    std::optional<std::vector<double>> embedding;

    bool operator==(const CharacterNode&) const = default;
};

struct EventEdge {
    std::string subject_id;
    std::string object_id;  // may equal subject_id
    std::string relation;

    bool operator==(const EventEdge&) const = default;
};

/// Story-world knowledge base: characters with attribute maps, event edges
/// and one style string. A graph is a plain value; every operation below
/// builds a new graph instead of mutating shared state.
struct CharacterGraph {
    std::vector<CharacterNode> characters;  // insertion order preserved
    std::vector<EventEdge> events;
    std::string style;

    const CharacterNode* find(std::string_view id) const;
    bool has(std::string_view id) const { return find(id) != nullptr; }

    bool operator==(const CharacterGraph&) const = default;
};

struct VocabularyEntry {
    std::string id;
    std::string display_name;
    std::vector<std::string> aliases;
    std::string frontal_caption;
    std::optional<std::vector<double>> embedding;
};

struct BuildReport {
    CharacterGraph graph;
    std::vector<std::string> warnings;
};

/// Builds the character vocabulary: each entry's frontal caption is parsed
/// and the attributes of the best matching entity (tried against aliases,
/// then the display name) become the character's attribute list. Captions
/// with no matching entity produce a warning and an attribute-free node.
BuildReport build_vocabulary(const std::vector<VocabularyEntry>& entries,
                             const Lexicon& lexicon = Lexicon::builtin());

/// Appends an event edge; both ids must exist.
CharacterGraph add_event(CharacterGraph graph, const std::string& subject_id,
                         const std::string& object_id, const std::string& relation);

/// Graph document serialization. Top-level keys: style, characters, events.
/// Unknown keys are rejected; errors name the offending field path.
std::string graph_to_json(const CharacterGraph& graph);
CharacterGraph graph_from_json(const std::string& text);

void save_graph(const CharacterGraph& graph, const std::filesystem::path& destination);
CharacterGraph load_graph(const std::filesystem::path& source);

/// Entries file: array of {id, display_name, aliases[], frontal_caption,
/// embedding?}, mirroring the graph character schema.
std::vector<VocabularyEntry> load_entries(const std::filesystem::path& source);

}  // namespace charweave
