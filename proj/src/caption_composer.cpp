#include "charweave/caption_composer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include "charweave/errors.hpp"

namespace charweave {

namespace {

std::string lowercase_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::set<std::string> word_set(const std::string& text) {
    std::set<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.insert(w);
    return words;
}

bool is_vowel(char c) {
    switch (std::tolower(static_cast<unsigned char>(c))) {
        case 'a':
        case 'e':
        case 'i':
        case 'o':
        case 'u':
            return true;
        default:
            return false;
    }
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na <= 0.0 || nb <= 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::vector<std::string> split_whitespace(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) out.push_back(std::move(w));
    return out;
}

bool SimilarityProvider::exact_label_match(const std::string& label,
                                           const CharacterNode& character) {
    const std::string l = lowercase_ascii(label);
    if (l == lowercase_ascii(character.display_name)) return true;
    for (const std::string& alias : character.aliases) {
        if (l == alias) return true;
    }
    return false;
}

double LexicalSimilarity::score(const std::string& label, const CharacterNode& character) const {
    if (exact_label_match(label, character)) return 1.0;
    const std::set<std::string> label_words = word_set(lowercase_ascii(label));
    std::set<std::string> character_words;
    for (const std::string& alias : character.aliases) {
        for (const std::string& w : word_set(alias)) character_words.insert(w);
    }
    for (const std::string& attr : character.attributes) {
        for (const std::string& w : word_set(lowercase_ascii(attr))) character_words.insert(w);
    }
    if (label_words.empty() || character_words.empty()) return 0.0;
    std::size_t intersection = 0;
    for (const std::string& w : label_words) intersection += character_words.count(w);
    const std::size_t unions = label_words.size() + character_words.size() - intersection;
    return static_cast<double>(intersection) / static_cast<double>(unions);
}

double EmbeddingSimilarity::score(const std::string& label, const CharacterNode& character) const {
    if (exact_label_match(label, character)) return 1.0;
    if (character.embedding && embedder_) {
        const std::vector<double> label_embedding = embedder_(label);
        if (!label_embedding.empty() && label_embedding.size() == character.embedding->size()) {
            return (1.0 + cosine(label_embedding, *character.embedding)) / 2.0;
        }
    }
    return fallback_.score(label, character);
}

std::string match_character(const std::string& coarse_label, const CharacterGraph& graph,
                            const SimilarityProvider& sim, double floor) {
    if (graph.characters.empty()) throw Error("match_character: the character graph is empty");
    const CharacterNode* best = nullptr;
    double best_score = -1.0;
    for (const CharacterNode& c : graph.characters) {
        const double s = sim.score(coarse_label, c);
        if (best == nullptr || s > best_score || (s == best_score && c.id < best->id)) {
            best = &c;
            best_score = s;
        }
    }
    if (best_score < floor) {
        std::ostringstream msg;
        msg << "no character matches label \"" << coarse_label << "\" (best score " << best_score
            << " below floor " << floor << ")";
        throw NoMatchError(msg.str());
    }
    return best->id;
}

std::string compose_character_description(const CharacterNode& character) {
    if (character.attributes.empty()) return character.display_name;

    std::vector<std::string> single_word;
    std::vector<std::string> multi_word;
    for (const std::string& attr : character.attributes) {
        if (attr.find(' ') == std::string::npos) {
            single_word.push_back(attr);
        } else {
            multi_word.push_back(attr);
        }
    }

    std::string text = character.display_name;
    const std::vector<std::string>* rest = nullptr;
    if (!character.aliases.empty()) {
        std::string species;
        for (const std::string& a : single_word) species += a + " ";
        species += character.aliases.front();
        text += ", ";
        text += is_vowel(species[0]) ? "an " : "a ";
        text += species;
        rest = &multi_word;
    } else {
        rest = &character.attributes;
    }

    static const char* const kConnectors[] = {"with", "and", "in"};
    for (std::size_t k = 0; k < rest->size(); ++k) {
        const std::size_t c = std::min<std::size_t>(k, 2);
        text += " ";
        text += kConnectors[c];
        text += " ";
        text += (*rest)[k];
    }
    return text;
}

std::string compose_event_description(const std::vector<Relation>& relations,
                                       const std::vector<std::string>& entity_names) {
    struct Clause {
        std::string predicate;
        std::optional<std::string> object_name;
        std::vector<std::string> subjects;
    };
    std::vector<Clause> clauses;
    for (const Relation& r : relations) {
        if (r.subject < 0 || r.subject >= static_cast<int>(entity_names.size()))
            throw Error("compose_event_description: relation subject out of range");
        const std::string& subject = entity_names[r.subject];
        std::optional<std::string> object;
        if (r.object) {
            if (*r.object < 0 || *r.object >= static_cast<int>(entity_names.size()))
                throw Error("compose_event_description: relation object out of range");
            object = entity_names[*r.object];
            if (*object == subject) object.reset();  // single participant
        }
        Clause* clause = nullptr;
        for (Clause& c : clauses) {
            if (c.predicate == r.predicate && c.object_name == object) {
                clause = &c;
                break;
            }
        }
        if (clause == nullptr) {
            clauses.push_back({r.predicate, object, {}});
            clause = &clauses.back();
        }
        if (std::find(clause->subjects.begin(), clause->subjects.end(), subject) ==
            clause->subjects.end()) {
            clause->subjects.push_back(subject);
        }
    }

    std::string out;
    for (const Clause& c : clauses) {
        if (!out.empty()) out += ", ";
        for (std::size_t i = 0; i < c.subjects.size(); ++i) {
            if (i > 0) out += " and ";
            out += c.subjects[i];
        }
        out += " " + c.predicate;
        if (c.object_name) out += " " + *c.object_name;
        if (c.subjects.size() >= 2) out += " together";
    }
    return out;
}

namespace {

std::string entity_label(const Entity& entity) {
    std::string label;
    for (const std::string& m : entity.modifiers) {
        if (!label.empty()) label += ' ';
        label += m;
    }
    if (!label.empty()) label += ' ';
    label += entity.head;
    return label;
}

}  // namespace

SceneCaption compose_scene_caption(const std::string& scene_text, const CharacterGraph& graph,
                                   const SimilarityProvider& sim, const ComposeOptions& options) {
    if (graph.style.empty())
        throw Error("compose_scene_caption: the graph has no style string set");

    // Character names from the graph extend the lexicon as nouns so scene
    // texts can refer to characters directly ("Loopy is skiing ...").
    Lexicon lexicon = options.lexicon ? *options.lexicon : Lexicon::builtin();
    for (const CharacterNode& c : graph.characters) {
        for (const std::string& w : split_whitespace(lowercase_ascii(c.display_name))) {
            if (!lexicon.has_word(w)) lexicon.add_word(w, TokenKind::noun);
        }
        for (const std::string& alias : c.aliases) {
            const std::vector<std::string> words = split_whitespace(alias);
            for (const std::string& w : words) {
                if (!lexicon.has_word(w)) lexicon.add_word(w, TokenKind::noun);
            }
            if (words.size() >= 2 && !lexicon.is_compound(alias)) lexicon.add_compound(alias);
        }
    }

    const SceneGraph sg = parse_scene_graph(scene_text, lexicon);

    SceneCaption caption;
    caption.style = graph.style;

    std::vector<std::string> entity_names(sg.entities.size());
    std::vector<std::string> matched_order;  // unique ids, first-mention order
    for (std::size_t i = 0; i < sg.entities.size(); ++i) {
        entity_names[i] = sg.entities[i].head;
        if (graph.characters.empty()) continue;
        try {
            const std::string id =
                match_character(entity_label(sg.entities[i]), graph, sim, options.match_floor);
            entity_names[i] = graph.find(id)->display_name;
            if (std::find(matched_order.begin(), matched_order.end(), id) == matched_order.end())
                matched_order.push_back(id);
        } catch (const NoMatchError& e) {
            caption.warnings.push_back(e.what());
        }
    }

    if (matched_order.empty()) {
        caption.event_text = scene_text;  // unenhanced passthrough
    } else {
        caption.event_text = compose_event_description(sg.relations, entity_names);
        for (const std::string& id : matched_order) {
            caption.character_descriptions.emplace_back(
                id, compose_character_description(*graph.find(id)));
        }
    }

    // Flatten [style, event, descriptions...] and record token ownership.
    int token_cursor = 0;
    const auto append_segment = [&](const std::string& text,
                                    const std::optional<std::string>& owner) {
        if (text.empty()) return;
        if (!caption.flat_caption.empty()) caption.flat_caption += ", ";
        caption.flat_caption += text;
        const int n = static_cast<int>(split_whitespace(text).size());
        caption.token_ownership.push_back({token_cursor, token_cursor + n, owner});
        token_cursor += n;
    };
    append_segment(caption.style, std::nullopt);
    append_segment(caption.event_text, std::nullopt);
    for (const auto& [id, text] : caption.character_descriptions) append_segment(text, id);
    return caption;
}

}  // namespace charweave
