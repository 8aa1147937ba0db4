#include "summ/syntax.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

#include "summ/error.hpp"

namespace summ {

int ParseTree::internal_count() const {
    if (is_leaf()) return 0;
    int n = 1;
    for (const ParseTree& c : children) n += c.internal_count();
    return n;
}

int ParseTree::leaf_count() const {
    if (is_leaf()) return 1;
    int n = 0;
    for (const ParseTree& c : children) n += c.leaf_count();
    return n;
}

bool ParseTree::same_structure(const ParseTree& o) const {
    if (label != o.label || children.size() != o.children.size()) return false;
    for (std::size_t i = 0; i < children.size(); ++i)
        if (!children[i].same_structure(o.children[i])) return false;
    return true;
}

int SerializedDoc::word_count() const {
    int n = 0;
    for (std::uint8_t m : word_mask) n += m;
    return n;
}

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

struct TreeReader {
    std::string_view text;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && is_space(text[pos])) ++pos;
    }

    std::string read_atom() {
        const std::size_t start = pos;
        while (pos < text.size() && !is_space(text[pos]) && text[pos] != '(' && text[pos] != ')')
            ++pos;
        return std::string(text.substr(start, pos - start));
    }

    ParseTree read_node() {
        skip_ws();
        if (pos >= text.size() || text[pos] != '(')
            throw TreeParseError("UnbalancedBrackets: expected '('", pos);
        const std::size_t open = pos;
        ++pos;
        skip_ws();
        ParseTree node;
        node.label = read_atom();
        if (node.label.empty()) throw TreeParseError("EmptyNode: missing node label", pos);
        while (true) {
            skip_ws();
            if (pos >= text.size())
                throw TreeParseError("UnbalancedBrackets: unclosed '('", open);
            if (text[pos] == ')') {
                ++pos;
                break;
            }
            if (text[pos] == '(') {
                node.children.push_back(read_node());
            } else {
                ParseTree leaf;
                leaf.label = read_atom();
                node.children.push_back(std::move(leaf));
            }
        }
        if (node.children.empty())
            throw TreeParseError("EmptyNode: internal node without children", pos - 1);
        return node;
    }
};

void serialize_into(const ParseTree& t, bool emit_label, std::vector<Token>& out) {
    if (t.is_leaf()) {
        out.push_back(Token{t.label, TokenKind::Word});
        return;
    }
    if (emit_label) out.push_back(Token{t.label, TokenKind::Symbol});
    for (const ParseTree& c : t.children) serialize_into(c, true, out);
}

void print_into(const ParseTree& t, std::string& out) {
    if (t.is_leaf()) {
        out += t.label;
        return;
    }
    out += '(';
    out += t.label;
    for (const ParseTree& c : t.children) {
        out += ' ';
        print_into(c, out);
    }
    out += ')';
}

}  // namespace

ParseTree parse_bracketed(std::string_view text) {
    TreeReader r{text};
    ParseTree t = r.read_node();
    r.skip_ws();
    if (r.pos != text.size())
        throw TreeParseError("TrailingInput: content after tree", r.pos);
    return t;
}

std::string pretty_print(const ParseTree& tree) {
    std::string out;
    print_into(tree, out);
    return out;
}

std::vector<Token> serialize_dfs(const ParseTree& tree, bool drop_root) {
    std::vector<Token> out;
    serialize_into(tree, !drop_root, out);
    return out;
}

SerializedDoc concat_document(std::span<const ParseTree> trees, bool drop_root) {
    if (trees.empty()) throw DataError("EmptyDocument: no sentence trees");
    SerializedDoc doc;
    for (const ParseTree& t : trees) {
        const int begin = doc.length();
        std::vector<Token> toks = serialize_dfs(t, drop_root);
        for (Token& tok : toks) {
            doc.word_mask.push_back(tok.kind == TokenKind::Word ? 1 : 0);
            doc.tokens.push_back(std::move(tok));
        }
        doc.sentence_bounds.emplace_back(begin, doc.length());
    }
    return doc;
}

SerializedDoc words_as_doc(std::span<const std::string> sentences_words) {
    SerializedDoc doc;
    for (const std::string& sent : sentences_words) {
        const int begin = doc.length();
        std::istringstream ss(sent);
        std::string w;
        while (ss >> w) {
            doc.tokens.push_back(Token{w, TokenKind::Word});
            doc.word_mask.push_back(1);
        }
        doc.sentence_bounds.emplace_back(begin, doc.length());
    }
    if (doc.tokens.empty()) throw DataError("EmptyDocument: no words");
    return doc;
}

// --- Vocab ---

Vocab::Vocab() {
    add("<pad>", EntryKind::Special);
    add("<unk>", EntryKind::Special);
    add("<s>", EntryKind::Special);
    add("</s>", EntryKind::Special);
}

int Vocab::add(std::string text, EntryKind kind) {
    const int id = int(entries_.size());
    entries_.push_back(Entry{std::move(text), kind});
    if (kind == EntryKind::Symbol) ++symbol_count_;
    return id;
}

void Vocab::reindex() {
    word_index_.clear();
    symbol_index_.clear();
    for (int id = 0; id < size(); ++id) {
        const Entry& e = entries_[std::size_t(id)];
        if (e.kind == EntryKind::Word)
            word_index_.emplace_back(e.text, id);
        else if (e.kind == EntryKind::Symbol)
            symbol_index_.emplace_back(e.text, id);
    }
    std::sort(word_index_.begin(), word_index_.end());
    std::sort(symbol_index_.begin(), symbol_index_.end());
}

namespace {

int lookup(const std::vector<std::pair<std::string, int>>& index, std::string_view key) {
    auto it = std::lower_bound(index.begin(), index.end(), key,
                               [](const auto& e, std::string_view k) { return e.first < k; });
    if (it != index.end() && it->first == key) return it->second;
    return -1;
}

}  // namespace

Vocab Vocab::build(std::span<const SerializedDoc> corpus, int max_words) {
    if (max_words < 0) max_words = 0;
    struct Stat {
        long long count = 0;
        long long first_seen = 0;
    };
    std::map<std::string, Stat> word_stats;
    std::vector<std::string> symbols;  // first-occurrence order
    std::map<std::string, bool> symbol_seen;
    long long tick = 0;
    for (const SerializedDoc& doc : corpus) {
        for (const Token& tok : doc.tokens) {
            ++tick;
            if (tok.kind == TokenKind::Symbol) {
                if (!symbol_seen[tok.text]) {
                    symbol_seen[tok.text] = true;
                    symbols.push_back(tok.text);
                }
            } else {
                Stat& s = word_stats[tok.text];
                if (s.count == 0) s.first_seen = tick;
                ++s.count;
            }
        }
    }

    Vocab v;
    for (std::string& s : symbols) v.add(std::move(s), EntryKind::Symbol);

    std::vector<std::pair<std::string, Stat>> ranked(word_stats.begin(), word_stats.end());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second.count != b.second.count) return a.second.count > b.second.count;
        return a.second.first_seen < b.second.first_seen;
    });
    const std::size_t keep = std::min<std::size_t>(ranked.size(), std::size_t(max_words));
    for (std::size_t i = 0; i < keep; ++i) v.add(std::move(ranked[i].first), EntryKind::Word);

    v.reindex();
    return v;
}

int Vocab::id_of(const Token& tok) const {
    const int id = tok.kind == TokenKind::Word ? word_id(tok.text) : symbol_id(tok.text);
    return id >= 0 ? id : unk_id;
}

int Vocab::word_id(std::string_view word) const { return lookup(word_index_, word); }

int Vocab::symbol_id(std::string_view symbol) const { return lookup(symbol_index_, symbol); }

void Vocab::save(const std::filesystem::path& file) const {
    std::ofstream out(file);
    if (!out) throw IoError("Io: cannot write vocab file " + file.string());
    for (int id = 4; id < size(); ++id) {
        const Entry& e = entries_[std::size_t(id)];
        out << (e.kind == EntryKind::Symbol ? 's' : 'w') << '\t' << e.text << '\n';
    }
    if (!out) throw IoError("Io: failed writing vocab file " + file.string());
}

Vocab Vocab::load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw IoError("Io: cannot open vocab file " + file.string());
    Vocab v;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line.size() < 3 || line[1] != '\t' || (line[0] != 'w' && line[0] != 's'))
            throw DataError("MalformedVocab: line " + std::to_string(lineno) + " in " +
                            file.string());
        v.add(line.substr(2), line[0] == 's' ? EntryKind::Symbol : EntryKind::Word);
    }
    v.reindex();
    return v;
}

// --- extended encoding ---

int ExtendedVocab::oov_id(std::string_view word) const {
    for (std::size_t j = 0; j < oov_words.size(); ++j)
        if (oov_words[j] == word) return base_size + int(j);
    return -1;
}

const std::string& ExtendedVocab::text(const Vocab& vocab, int ext_id) const {
    if (ext_id < base_size) return vocab.text(ext_id);
    return oov_words[std::size_t(ext_id - base_size)];
}

std::pair<std::vector<int>, ExtendedVocab> encode_extended(const SerializedDoc& doc,
                                                           const Vocab& vocab) {
    ExtendedVocab ext;
    ext.base_size = vocab.size();
    std::vector<int> ids;
    ids.reserve(doc.tokens.size());
    for (const Token& tok : doc.tokens) {
        if (tok.kind == TokenKind::Word) {
            int id = vocab.word_id(tok.text);
            if (id < 0) {
                id = ext.oov_id(tok.text);
                if (id < 0) {
                    id = ext.size();
                    ext.oov_words.push_back(tok.text);
                }
            }
            ids.push_back(id);
        } else {
            ids.push_back(vocab.id_of(tok));
        }
    }
    return {std::move(ids), std::move(ext)};
}

EncodedDoc encode_document(const SerializedDoc& doc, const Vocab& vocab, std::string doc_id) {
    EncodedDoc enc;
    enc.id = std::move(doc_id);
    auto [ext_ids, ext] = encode_extended(doc, vocab);
    enc.ext_ids = std::move(ext_ids);
    enc.extended = std::move(ext);
    enc.word_mask = doc.word_mask;
    enc.base_ids.reserve(enc.ext_ids.size());
    for (std::size_t i = 0; i < enc.ext_ids.size(); ++i) {
        const int id = enc.ext_ids[i];
        enc.base_ids.push_back(id < vocab.size() ? id : Vocab::unk_id);
        if (doc.word_mask[i])
            enc.word_positions.push_back(int(i));
        else
            enc.symbol_positions.push_back(int(i));
    }
    return enc;
}

std::vector<int> EncodedDoc::word_ext_ids() const {
    std::vector<int> out;
    out.reserve(word_positions.size());
    for (int p : word_positions) out.push_back(ext_ids[std::size_t(p)]);
    return out;
}

std::vector<int> encode_summary(std::span<const std::string> words, const Vocab& vocab,
                                const ExtendedVocab& ext) {
    std::vector<int> ids;
    ids.reserve(words.size() + 1);
    for (const std::string& w : words) {
        int id = vocab.word_id(w);
        if (id < 0) id = ext.oov_id(w);
        if (id < 0) id = Vocab::unk_id;
        ids.push_back(id);
    }
    ids.push_back(Vocab::eos_id);
    return ids;
}

}  // namespace summ
