#include "charweave/character_graph.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "charweave/errors.hpp"
#include "json_util.hpp"

namespace charweave {

namespace {

std::string lowercase_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::vector<std::string> dedup_preserving_order(const std::vector<std::string>& values) {
    std::vector<std::string> out;
    for (const std::string& v : values) {
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

}  // namespace

const CharacterNode* CharacterGraph::find(std::string_view id) const {
    for (const CharacterNode& c : characters) {
        if (c.id == id) return &c;
    }
    return nullptr;
}

BuildReport build_vocabulary(const std::vector<VocabularyEntry>& entries, const Lexicon& lexicon) {
    BuildReport report;
    std::set<std::string> seen_ids;
    for (const VocabularyEntry& entry : entries) {
        if (entry.id.empty()) throw Error("build_vocabulary: entry with empty id");
        if (!seen_ids.insert(entry.id).second)
            throw Error("build_vocabulary: duplicate character id \"" + entry.id + "\"");

        CharacterNode node;
        node.id = entry.id;
        node.display_name = entry.display_name;
        for (const std::string& alias : entry.aliases) node.aliases.push_back(lowercase_ascii(alias));
        node.frontal_caption = entry.frontal_caption;
        node.embedding = entry.embedding;

        const SceneGraph sg = parse_scene_graph(entry.frontal_caption, lexicon);
        std::vector<std::string> candidates = node.aliases;
        candidates.push_back(lowercase_ascii(entry.display_name));

        const Entity* matched = nullptr;
        for (const std::string& candidate : candidates) {
            if (candidate.empty()) continue;
            try {
                if (const Entity* e = find_entity(sg, candidate)) {
                    matched = e;
                    break;
                }
            } catch (const AmbiguityError&) {
                report.warnings.push_back("character \"" + entry.id + "\": head \"" + candidate +
                                          "\" is ambiguous in its frontal caption");
            }
        }
        if (matched == nullptr) {
            report.warnings.push_back("character \"" + entry.id +
                                      "\": no entity in the frontal caption matches its labels; "
                                      "stored with empty attributes");
        } else {
            node.attributes = dedup_preserving_order(matched->modifiers);
        }
        report.graph.characters.push_back(std::move(node));
    }
    return report;
}

CharacterGraph add_event(CharacterGraph graph, const std::string& subject_id,
                         const std::string& object_id, const std::string& relation) {
    if (!graph.has(subject_id))
        throw Error("add_event: unknown subject id \"" + subject_id + "\"");
    if (!graph.has(object_id)) throw Error("add_event: unknown object id \"" + object_id + "\"");
    graph.events.push_back({subject_id, object_id, relation});
    return graph;
}

namespace {

using jsonutil::ordered_json;

ordered_json character_to_json(const CharacterNode& node) {
    ordered_json j;
    j["id"] = node.id;
    j["display_name"] = node.display_name;
    j["aliases"] = node.aliases;
    j["frontal_caption"] = node.frontal_caption;
    j["attributes"] = node.attributes;
    if (node.embedding) j["embedding"] = *node.embedding;
    return j;
}

CharacterNode character_from_json(const ordered_json& j, const std::string& path) {
    jsonutil::expect_object(j, path);
    jsonutil::reject_unknown_keys(
        j, {"id", "display_name", "aliases", "frontal_caption", "attributes", "embedding"}, path);
    CharacterNode node;
    node.id = jsonutil::get_string(jsonutil::require_key(j, "id", path), path + ".id");
    node.display_name = jsonutil::get_string(jsonutil::require_key(j, "display_name", path),
                                             path + ".display_name");
    node.aliases = jsonutil::get_string_array(jsonutil::require_key(j, "aliases", path),
                                              path + ".aliases");
    node.frontal_caption = jsonutil::get_string(jsonutil::require_key(j, "frontal_caption", path),
                                                path + ".frontal_caption");
    node.attributes = jsonutil::get_string_array(jsonutil::require_key(j, "attributes", path),
                                                 path + ".attributes");
    if (j.contains("embedding"))
        node.embedding = jsonutil::get_number_array(j["embedding"], path + ".embedding");
    return node;
}

EventEdge event_from_json(const ordered_json& j, const std::string& path) {
    jsonutil::expect_object(j, path);
    jsonutil::reject_unknown_keys(j, {"subject_id", "object_id", "relation"}, path);
    EventEdge edge;
    edge.subject_id = jsonutil::get_string(jsonutil::require_key(j, "subject_id", path),
                                           path + ".subject_id");
    edge.object_id = jsonutil::get_string(jsonutil::require_key(j, "object_id", path),
                                          path + ".object_id");
    edge.relation = jsonutil::get_string(jsonutil::require_key(j, "relation", path),
                                         path + ".relation");
    return edge;
}

}  // namespace

std::string graph_to_json(const CharacterGraph& graph) {
    ordered_json j;
    j["style"] = graph.style;
    j["characters"] = ordered_json::array();
    for (const CharacterNode& c : graph.characters) j["characters"].push_back(character_to_json(c));
    j["events"] = ordered_json::array();
    for (const EventEdge& e : graph.events) {
        ordered_json edge;
        edge["subject_id"] = e.subject_id;
        edge["object_id"] = e.object_id;
        edge["relation"] = e.relation;
        j["events"].push_back(std::move(edge));
    }
    return j.dump(2) + "\n";
}

CharacterGraph graph_from_json(const std::string& text) {
    const ordered_json j = jsonutil::parse_document(text, "graph document");
    jsonutil::expect_object(j, "$");
    jsonutil::reject_unknown_keys(j, {"style", "characters", "events"}, "$");

    CharacterGraph graph;
    graph.style = jsonutil::get_string(jsonutil::require_key(j, "style", "$"), "$.style");

    const ordered_json& characters = jsonutil::require_key(j, "characters", "$");
    jsonutil::expect_array(characters, "$.characters");
    std::set<std::string> ids;
    for (std::size_t i = 0; i < characters.size(); ++i) {
        const std::string path = "$.characters[" + std::to_string(i) + "]";
        CharacterNode node = character_from_json(characters[i], path);
        if (!ids.insert(node.id).second)
            throw Error(path + ".id: duplicate character id \"" + node.id + "\"");
        graph.characters.push_back(std::move(node));
    }

    const ordered_json& events = jsonutil::require_key(j, "events", "$");
    jsonutil::expect_array(events, "$.events");
    for (std::size_t i = 0; i < events.size(); ++i) {
        const std::string path = "$.events[" + std::to_string(i) + "]";
        EventEdge edge = event_from_json(events[i], path);
        if (!graph.has(edge.subject_id))
            throw Error(path + ".subject_id: unknown character id \"" + edge.subject_id + "\"");
        if (!graph.has(edge.object_id))
            throw Error(path + ".object_id: unknown character id \"" + edge.object_id + "\"");
        graph.events.push_back(std::move(edge));
    }
    return graph;
}

void save_graph(const CharacterGraph& graph, const std::filesystem::path& destination) {
    std::ofstream out(destination);
    if (!out) throw Error("save_graph: cannot open " + destination.string() + " for writing");
    out << graph_to_json(graph);
    if (!out) throw Error("save_graph: write to " + destination.string() + " failed");
}

CharacterGraph load_graph(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw Error("load_graph: cannot open " + source.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return graph_from_json(buffer.str());
}

std::vector<VocabularyEntry> load_entries(const std::filesystem::path& source) {
    std::ifstream in(source);
    if (!in) throw Error("load_entries: cannot open " + source.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();

    const ordered_json j = jsonutil::parse_document(buffer.str(), "entries document");
    jsonutil::expect_array(j, "$");
    std::vector<VocabularyEntry> entries;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const std::string path = "$[" + std::to_string(i) + "]";
        const ordered_json& item = j[i];
        jsonutil::expect_object(item, path);
        jsonutil::reject_unknown_keys(
            item, {"id", "display_name", "aliases", "frontal_caption", "embedding"}, path);
        VocabularyEntry entry;
        entry.id = jsonutil::get_string(jsonutil::require_key(item, "id", path), path + ".id");
        entry.display_name = jsonutil::get_string(
            jsonutil::require_key(item, "display_name", path), path + ".display_name");
        entry.aliases = jsonutil::get_string_array(jsonutil::require_key(item, "aliases", path),
                                                   path + ".aliases");
        entry.frontal_caption = jsonutil::get_string(
            jsonutil::require_key(item, "frontal_caption", path), path + ".frontal_caption");
        if (item.contains("embedding"))
            entry.embedding = jsonutil::get_number_array(item["embedding"], path + ".embedding");
        entries.push_back(std::move(entry));
    }
    return entries;
}

}  // namespace charweave
