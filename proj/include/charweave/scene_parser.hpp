#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace charweave {

enum class TokenKind {
    determiner,
    conjunction,
    copula,
    preposition,
    adjective,
    noun,
    verb_gerund,
    verb_other,
    unknown,
};

const char* to_string(TokenKind kind);

struct Token {
    std::string text;  // lowercase, punctuation stripped except internal hyphens
    int index = 0;     // contiguous from 0
    TokenKind kind = TokenKind::unknown;

    bool operator==(const Token&) const = default;
};

/// Word-kind table plus compound-noun list. Kind lookup is lexicon first,
/// then morphology: "-ing" -> verb_gerund, "-ish"/"-y"/"-ed" -> adjective,
/// anything else -> noun. Suffix rules require a non-empty stem.
///
/// File formats: word list is one `word<TAB>kind` per line, compound list is
/// one multiword head per line. Blank lines and lines starting with '#' are
/// skipped. File entries extend (and may override) the built-in tables.
class Lexicon {
public:
    Lexicon() = default;

    /// Built-in word lists; "polar bear" is a pre-listed compound.
    static const Lexicon& builtin();

    void add_word(const std::string& word, TokenKind kind);
    void add_compound(const std::string& phrase);

    void load_words_file(const std::filesystem::path& path);
    void load_compounds_file(const std::filesystem::path& path);

    bool has_word(const std::string& word) const;
    TokenKind kind_of(const std::string& word) const;

    bool is_compound(const std::string& phrase) const;
    int max_compound_words() const { return max_compound_words_; }

private:
    std::unordered_map<std::string, TokenKind> words_;
    std::set<std::string> compounds_;
    int max_compound_words_ = 0;
};

struct Entity {
    std::string head;                    // possibly compound, e.g. "polar bear"
    std::vector<std::string> modifiers;  // determiner-free attribute strings
    int span_begin = 0;                  // token index range of the core noun phrase
    int span_end = 0;

    bool operator==(const Entity&) const = default;
};

struct Relation {
    int subject = 0;
    std::string predicate;  // verb phrase, e.g. "skiing on snowy mountain"
    std::optional<int> object;

    bool operator==(const Relation&) const = default;
};

struct SceneGraph {
    std::vector<Entity> entities;  // in textual order
    std::vector<Relation> relations;
    std::string source_text;

    bool operator==(const SceneGraph&) const = default;
};

/// Lowercases, strips punctuation (internal hyphens survive) and assigns
/// token kinds. Empty input yields an empty list.
std::vector<Token> tokenize(const std::string& text, const Lexicon& lexicon = Lexicon::builtin());

/// Rule-based parse of a short declarative caption.
///
/// Entities are maximal (ADJ* NOUN+) spans with determiners dropped;
/// adjacent nouns merge into one head only when the compound table lists the
/// phrase. "with NP" and "wearing NP" directly after an entity attach the NP
/// text as one modifier of that entity. Relations come from the pattern
/// Entity [conj Entity] copula? VERB_GERUND complement*, where a complement
/// is either "preposition NP" or a bare (determiner-free) NP acting as a
/// direct object; complements attach to the nearest preceding gerund. A
/// coordinated subject yields one relation per subject with an identical
/// predicate string. Unparseable stretches are skipped; captions with
/// pronouns are unsupported.
SceneGraph parse_scene_graph(const std::string& text, const Lexicon& lexicon = Lexicon::builtin());

/// Entity with the given head, matching exact heads first and falling back
/// to compound containment ("polar bear" contains "bear"). Returns nullptr
/// when nothing matches; throws AmbiguityError when the match is not unique.
const Entity* find_entity(const SceneGraph& graph, const std::string& head);

/// Modifiers of the unique entity matching `head`; empty when none matches.
std::vector<std::string> extract_character_map(const SceneGraph& graph, const std::string& head);

/// Canonical one-line-per-item rendering used by golden tests and debugging.
std::string to_string(const SceneGraph& graph);

}  // namespace charweave
