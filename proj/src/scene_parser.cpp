#include "charweave/scene_parser.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "charweave/errors.hpp"

namespace charweave {

namespace {

const char* const kDeterminers[] = {"a", "an", "the", "this", "that", "these", "those"};

const char* const kConjunctions[] = {"and", "or", "but", "nor"};

const char* const kCopulas[] = {"is", "are", "was", "were", "am", "be", "been", "being"};

const char* const kPrepositions[] = {
    "about", "above", "across", "after", "against", "along", "among", "around", "at",
    "before", "behind", "below", "beneath", "beside", "between", "beyond", "by",
    "during", "for", "from", "in", "inside", "into", "near", "of", "off", "on",
    "onto", "outside", "over", "through", "to", "toward", "towards", "under",
    "upon", "with", "within", "without"};

const char* const kOtherVerbs[] = {
    "has", "have", "had", "do", "does", "did", "go", "goes", "went", "make", "makes",
    "sit", "sits", "stand", "stands", "run", "runs", "walk", "walks", "jump", "jumps",
    "play", "plays", "eat", "eats", "hold", "holds", "look", "looks", "smile",
    "smiles", "wear", "wears", "ride", "rides", "give", "gives", "take", "takes"};

const char* const kAdjectives[] = {
    "red", "orange", "yellow", "green", "blue", "purple", "pink", "brown", "black",
    "white", "gray", "grey", "golden", "silver", "big", "small", "little", "large",
    "tiny", "huge", "round", "long", "short", "tall", "gentle", "clever", "smart",
    "kind", "brave", "elegant", "cute", "soft", "warm", "cold", "bright", "dark",
    "female", "male", "polar", "young", "old", "new", "wooden", "magic", "royal",
    "pale"};

// Pins for words the suffix rules would misclassify, plus common story nouns.
const char* const kNouns[] = {
    "king", "ring", "wing", "thing", "string", "spring", "morning", "evening",
    "building", "painting", "clothing", "bed", "shed", "sled", "boy", "toy", "day",
    "sky", "city", "story", "family", "party", "monkey", "key", "honey", "candy",
    "puppy", "bunny", "pony", "lady", "body", "money", "valley", "berry", "cherry",
    "snowman", "reindeer", "deer", "queen", "princess", "man", "woman", "girl",
    "bear", "beaver", "penguin", "bird", "fox", "dinosaur", "dino", "dragon",
    "robot", "nose", "hair", "hat", "dress", "coat", "scarf", "fur", "beak", "horn",
    "antenna", "antlers", "headband", "goggles", "eye", "eyes", "face", "belly",
    "mountain", "snow", "forest", "house", "cookie", "cookies", "cake", "tea",
    "book", "ball", "kite", "flower", "flowers", "tree", "sun", "moon", "star",
    "stars", "night", "kitchen", "garden", "friend", "friends"};

const char* const kCompounds[] = {"polar bear", "ice cream", "teddy bear"};

bool ends_with(const std::string& word, const char* suffix) {
    const std::size_t n = std::char_traits<char>::length(suffix);
    return word.size() > n && word.compare(word.size() - n, n, suffix) == 0;
}

TokenKind morphology_kind(const std::string& word) {
    if (ends_with(word, "ing")) return TokenKind::verb_gerund;
    if (ends_with(word, "ish") || ends_with(word, "y") || ends_with(word, "ed"))
        return TokenKind::adjective;
    return TokenKind::noun;
}

TokenKind parse_kind_name(const std::string& name, const std::string& context) {
    if (name == "determiner") return TokenKind::determiner;
    if (name == "conjunction") return TokenKind::conjunction;
    if (name == "copula") return TokenKind::copula;
    if (name == "preposition") return TokenKind::preposition;
    if (name == "adjective") return TokenKind::adjective;
    if (name == "noun") return TokenKind::noun;
    if (name == "verb_gerund") return TokenKind::verb_gerund;
    if (name == "verb_other") return TokenKind::verb_other;
    if (name == "unknown") return TokenKind::unknown;
    throw Error("lexicon: unknown token kind \"" + name + "\" (" + context + ")");
}

int count_words(const std::string& phrase) {
    int n = 0;
    bool in_word = false;
    for (char c : phrase) {
        if (c == ' ') {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (const std::string& w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

std::string lowercase_ascii(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

}  // namespace

const char* to_string(TokenKind kind) {
    switch (kind) {
        case TokenKind::determiner: return "determiner";
        case TokenKind::conjunction: return "conjunction";
        case TokenKind::copula: return "copula";
        case TokenKind::preposition: return "preposition";
        case TokenKind::adjective: return "adjective";
        case TokenKind::noun: return "noun";
        case TokenKind::verb_gerund: return "verb_gerund";
        case TokenKind::verb_other: return "verb_other";
        case TokenKind::unknown: return "unknown";
    }
    return "unknown";
}

const Lexicon& Lexicon::builtin() {
    static const Lexicon instance = [] {
        Lexicon lex;
        for (const char* w : kDeterminers) lex.add_word(w, TokenKind::determiner);
        for (const char* w : kConjunctions) lex.add_word(w, TokenKind::conjunction);
        for (const char* w : kCopulas) lex.add_word(w, TokenKind::copula);
        for (const char* w : kPrepositions) lex.add_word(w, TokenKind::preposition);
        for (const char* w : kOtherVerbs) lex.add_word(w, TokenKind::verb_other);
        for (const char* w : kAdjectives) lex.add_word(w, TokenKind::adjective);
        for (const char* w : kNouns) lex.add_word(w, TokenKind::noun);
        for (const char* w : kCompounds) lex.add_compound(w);
        return lex;
    }();
    return instance;
}

void Lexicon::add_word(const std::string& word, TokenKind kind) {
    words_[lowercase_ascii(word)] = kind;
}

void Lexicon::add_compound(const std::string& phrase) {
    const std::string lower = lowercase_ascii(phrase);
    const int words = count_words(lower);
    if (words < 2) throw Error("lexicon: compound \"" + phrase + "\" must have at least two words");
    compounds_.insert(lower);
    if (words > max_compound_words_) max_compound_words_ = words;
}

void Lexicon::load_words_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("lexicon: cannot open word file " + path.string());
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw Error("lexicon: missing tab separator at " + path.string() + ":" +
                        std::to_string(line_no));
        const std::string word = line.substr(0, tab);
        const std::string kind = line.substr(tab + 1);
        if (word.empty())
            throw Error("lexicon: empty word at " + path.string() + ":" + std::to_string(line_no));
        add_word(word, parse_kind_name(kind, path.string() + ":" + std::to_string(line_no)));
    }
}

void Lexicon::load_compounds_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("lexicon: cannot open compound file " + path.string());
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        add_compound(line);
    }
}

bool Lexicon::has_word(const std::string& word) const {
    return words_.count(lowercase_ascii(word)) > 0;
}

TokenKind Lexicon::kind_of(const std::string& word) const {
    const auto it = words_.find(word);
    if (it != words_.end()) return it->second;
    return morphology_kind(word);
}

bool Lexicon::is_compound(const std::string& phrase) const {
    return compounds_.count(phrase) > 0;
}

std::vector<Token> tokenize(const std::string& text, const Lexicon& lexicon) {
    std::vector<Token> tokens;
    std::string word;
    const auto flush = [&] {
        if (word.empty()) return;
        Token t;
        t.text = word;
        t.index = static_cast<int>(tokens.size());
        t.kind = lexicon.kind_of(word);
        tokens.push_back(std::move(t));
        word.clear();
    };
    for (std::size_t i = 0; i < text.size(); ++i) {
        const unsigned char c = static_cast<unsigned char>(text[i]);
        if (std::isspace(c)) {
            flush();
            continue;
        }
        if (std::isalnum(c)) {
            word += static_cast<char>(std::tolower(c));
            continue;
        }
        if (c >= 0x80) {  // keep non-ASCII bytes as-is
            word += static_cast<char>(c);
            continue;
        }
        if (c == '-' && !word.empty() && i + 1 < text.size() &&
            std::isalnum(static_cast<unsigned char>(text[i + 1]))) {
            word += '-';  // internal hyphen
            continue;
        }
        // every other punctuation character separates words
        flush();
    }
    flush();
    return tokens;
}

namespace {

// Consumes one flat noun phrase: an optional leading determiner followed by
// adjectives/nouns. Determiners never appear in the returned text and a
// second determiner stops the phrase.
std::string consume_flat_np(const std::vector<Token>& tokens, std::size_t& i) {
    std::vector<std::string> words;
    bool det_seen = false;
    while (i < tokens.size()) {
        const Token& t = tokens[i];
        if (t.kind == TokenKind::determiner) {
            if (det_seen || !words.empty()) break;
            det_seen = true;
            ++i;
            continue;
        }
        if (t.kind == TokenKind::adjective || t.kind == TokenKind::noun) {
            words.push_back(t.text);
            ++i;
            continue;
        }
        break;
    }
    return join_words(words);
}

// Consumes ADJ* NOUN+ starting at i and appends the resulting entities.
// Leading adjectives modify the first head; nouns merge into one head only
// via the compound table, otherwise each noun is its own entity.
// Returns indices of the created entities (empty when no noun follows).
std::vector<int> consume_subject_np(const std::vector<Token>& tokens, std::size_t& i,
                                    const Lexicon& lexicon, SceneGraph& sg) {
    const std::size_t first = i;
    while (i < tokens.size() && tokens[i].kind == TokenKind::adjective) ++i;
    const std::size_t first_noun = i;
    while (i < tokens.size() && tokens[i].kind == TokenKind::noun) ++i;
    if (first_noun == i) return {};  // adjectives with no noun: skipped stretch

    struct Group {
        std::string text;
        bool nounish;
        std::size_t tok_begin;
        std::size_t tok_end;
    };
    std::vector<Group> groups;
    std::size_t k = first;
    while (k < i) {
        int merged = 0;
        const int max_len =
            std::min<int>(lexicon.max_compound_words(), static_cast<int>(i - k));
        for (int len = max_len; len >= 2; --len) {
            std::vector<std::string> words;
            for (int j = 0; j < len; ++j) words.push_back(tokens[k + j].text);
            const std::string phrase = join_words(words);
            if (lexicon.is_compound(phrase)) {
                groups.push_back({phrase, true, k, k + len});
                merged = len;
                break;
            }
        }
        if (merged == 0) {
            groups.push_back(
                {tokens[k].text, tokens[k].kind == TokenKind::noun, k, k + 1});
            merged = 1;
        }
        k += merged;
    }

    std::vector<int> created;
    std::vector<std::string> lead_modifiers;
    for (const Group& g : groups) {
        if (!g.nounish) {
            if (created.empty()) lead_modifiers.push_back(g.text);
            continue;
        }
        Entity e;
        e.head = g.text;
        if (created.empty()) {
            e.modifiers = lead_modifiers;
            e.span_begin = static_cast<int>(first);
        } else {
            e.span_begin = static_cast<int>(g.tok_begin);
        }
        e.span_end = static_cast<int>(g.tok_end);
        created.push_back(static_cast<int>(sg.entities.size()));
        sg.entities.push_back(std::move(e));
    }
    return created;
}

}  // namespace

SceneGraph parse_scene_graph(const std::string& text, const Lexicon& lexicon) {
    const std::vector<Token> tokens = tokenize(text, lexicon);
    SceneGraph sg;
    sg.source_text = text;

    std::vector<int> subjects;
    std::string predicate;
    bool predicate_open = false;
    int open_entity = -1;  // attachment target for "with"/"wearing"
    bool pending_conj = false;
    bool pending_det = false;
    std::optional<std::string> pending_prep;

    const auto emit = [&] {
        if (predicate_open && !predicate.empty()) {
            for (int s : subjects) sg.relations.push_back({s, predicate, std::nullopt});
        }
        predicate.clear();
        predicate_open = false;
    };

    std::size_t i = 0;
    while (i < tokens.size()) {
        const Token& t = tokens[i];
        switch (t.kind) {
            case TokenKind::determiner:
                pending_det = true;
                ++i;
                break;

            case TokenKind::adjective:
            case TokenKind::noun: {
                if (pending_prep) {
                    std::string np = consume_flat_np(tokens, i);
                    if (predicate_open) {
                        if (!np.empty()) predicate += " " + *pending_prep + " " + np;
                    } else if (*pending_prep == "with" && open_entity >= 0) {
                        if (!np.empty())
                            sg.entities[open_entity].modifiers.push_back(std::move(np));
                    }
                    // other stray prepositional phrases are dropped
                    pending_prep.reset();
                    pending_det = false;
                    break;
                }
                if (predicate_open) {
                    // An NP after a gerund is a direct object unless it reads
                    // as the subject of a following clause (determiner plus a
                    // copula/gerund right behind the noun run).
                    bool new_clause = false;
                    if (pending_det) {
                        std::size_t probe = i;
                        while (probe < tokens.size() &&
                               (tokens[probe].kind == TokenKind::adjective ||
                                tokens[probe].kind == TokenKind::noun))
                            ++probe;
                        new_clause = probe < tokens.size() &&
                                     (tokens[probe].kind == TokenKind::copula ||
                                      tokens[probe].kind == TokenKind::verb_gerund);
                    }
                    if (!new_clause) {
                        std::string np = consume_flat_np(tokens, i);
                        if (!np.empty()) predicate += " " + np;
                        pending_det = false;
                        break;
                    }
                    emit();  // determiner starts a new clause
                }
                const bool coordinated = pending_conj;
                std::vector<int> created = consume_subject_np(tokens, i, lexicon, sg);
                if (!created.empty()) {
                    if (!coordinated) subjects.clear();
                    subjects.insert(subjects.end(), created.begin(), created.end());
                    open_entity = created.back();
                    pending_conj = false;
                }
                pending_det = false;
                break;
            }

            case TokenKind::conjunction:
                if (predicate_open) {
                    emit();  // clause separator; subjects stay for gerund chains
                } else {
                    pending_conj = true;
                }
                open_entity = -1;
                pending_prep.reset();
                pending_det = false;
                ++i;
                break;

            case TokenKind::copula:
                open_entity = -1;
                pending_prep.reset();
                pending_det = false;
                ++i;
                break;

            case TokenKind::preposition:
                pending_prep = t.text;
                pending_det = false;
                ++i;
                break;

            case TokenKind::verb_gerund: {
                if (t.text == "wearing" && open_entity >= 0 && !predicate_open) {
                    std::size_t probe = i + 1;
                    std::string np = consume_flat_np(tokens, probe);
                    if (!np.empty()) {
                        sg.entities[open_entity].modifiers.push_back(std::move(np));
                        i = probe;
                        pending_det = false;
                        pending_prep.reset();
                        break;
                    }
                }
                if (predicate_open) emit();  // gerund chain keeps the subjects
                predicate = t.text;
                predicate_open = true;
                open_entity = -1;
                pending_prep.reset();
                pending_det = false;
                ++i;
                break;
            }

            case TokenKind::verb_other:
            case TokenKind::unknown:
                open_entity = -1;
                pending_prep.reset();
                pending_det = false;
                ++i;
                break;
        }
    }
    emit();
    return sg;
}

const Entity* find_entity(const SceneGraph& graph, const std::string& head) {
    const std::string needle = lowercase_ascii(head);
    const auto contains_words = [&](const std::string& entity_head) {
        // needle must appear as a contiguous word subsequence of the head
        if (entity_head == needle) return true;
        std::size_t pos = entity_head.find(needle);
        while (pos != std::string::npos) {
            const bool left_ok = pos == 0 || entity_head[pos - 1] == ' ';
            const std::size_t end = pos + needle.size();
            const bool right_ok = end == entity_head.size() || entity_head[end] == ' ';
            if (left_ok && right_ok) return true;
            pos = entity_head.find(needle, pos + 1);
        }
        return false;
    };

    std::vector<const Entity*> exact;
    std::vector<const Entity*> contained;
    for (const Entity& e : graph.entities) {
        if (e.head == needle) {
            exact.push_back(&e);
        } else if (contains_words(e.head)) {
            contained.push_back(&e);
        }
    }
    const std::vector<const Entity*>& pool = exact.empty() ? contained : exact;
    if (pool.empty()) return nullptr;
    if (pool.size() > 1)
        throw AmbiguityError("ambiguous head \"" + head + "\": " +
                             std::to_string(pool.size()) + " entities match");
    return pool.front();
}

std::vector<std::string> extract_character_map(const SceneGraph& graph, const std::string& head) {
    const Entity* e = find_entity(graph, head);
    if (e == nullptr) return {};
    return e->modifiers;
}

std::string to_string(const SceneGraph& graph) {
    std::ostringstream out;
    out << "caption: " << graph.source_text << "\n";
    for (std::size_t i = 0; i < graph.entities.size(); ++i) {
        const Entity& e = graph.entities[i];
        out << "entity[" << i << "] head=\"" << e.head << "\" modifiers=[";
        for (std::size_t m = 0; m < e.modifiers.size(); ++m) {
            if (m > 0) out << ", ";
            out << '"' << e.modifiers[m] << '"';
        }
        out << "] span=" << e.span_begin << ".." << e.span_end << "\n";
    }
    for (std::size_t i = 0; i < graph.relations.size(); ++i) {
        const Relation& r = graph.relations[i];
        out << "relation[" << i << "] subject=" << r.subject << " predicate=\"" << r.predicate
            << '"';
        if (r.object) out << " object=" << *r.object;
        out << "\n";
    }
    return out.str();
}

}  // namespace charweave
