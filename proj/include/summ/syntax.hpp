#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace summ {

// Constituency parse tree. Internal nodes carry a parsing symbol (phrase label
// or POS tag), leaves carry a word. A node is a leaf iff it has no children.
struct ParseTree {
    std::string label;
    std::vector<ParseTree> children;

    bool is_leaf() const { return children.empty(); }
    int internal_count() const;
    int leaf_count() const;
    bool same_structure(const ParseTree& o) const;
};

enum class TokenKind : std::uint8_t { Word, Symbol };

struct Token {
    std::string text;
    TokenKind kind;

    bool operator==(const Token&) const = default;
};

// Flat token stream produced by depth-first serialization of all sentence
// trees of a document, concatenated in sentence order.
struct SerializedDoc {
    std::vector<Token> tokens;
    std::vector<std::uint8_t> word_mask;               // 1 exactly at Word tokens
    std::vector<std::pair<int, int>> sentence_bounds;  // [begin, end) per sentence

    int length() const { return int(tokens.size()); }
    int word_count() const;
};

// Parses a single PTB-style bracketed expression. Whitespace-insensitive,
// preserves child order. Errors name the byte offset: UnbalancedBrackets,
// EmptyNode, TrailingInput.
ParseTree parse_bracketed(std::string_view text);

// Canonical "(LABEL child ...)" rendering; parse_bracketed(pretty_print(t))
// reproduces the tree structure.
std::string pretty_print(const ParseTree& tree);

// Pre-order traversal: each internal node's label as a Symbol token before its
// subtree, each leaf as a Word token. drop_root omits the top node's symbol.
std::vector<Token> serialize_dfs(const ParseTree& tree, bool drop_root = true);

// Concatenation of the serialized sentence trees, with masks and bounds.
SerializedDoc concat_document(std::span<const ParseTree> trees, bool drop_root = true);

// A plain word sequence as a SerializedDoc (no symbols); used by the
// no-syntax ablation and plain-text corpora.
SerializedDoc words_as_doc(std::span<const std::string> sentences_words);

// Joint word + parsing-symbol vocabulary with dense ids. Specials and symbols
// are always in-vocab; only the most frequent max_words words are kept.
class Vocab {
public:
    static constexpr int pad_id = 0;
    static constexpr int unk_id = 1;
    static constexpr int bos_id = 2;
    static constexpr int eos_id = 3;

    enum class EntryKind : std::uint8_t { Special, Word, Symbol };

    static Vocab build(std::span<const SerializedDoc> corpus, int max_words);

    int size() const { return int(entries_.size()); }
    // Vocab id of a token; OOV words map to unk_id.
    int id_of(const Token& tok) const;
    int word_id(std::string_view word) const;      // -1 if absent
    int symbol_id(std::string_view symbol) const;  // -1 if absent
    const std::string& text(int id) const { return entries_[std::size_t(id)].text; }
    EntryKind kind(int id) const { return entries_[std::size_t(id)].kind; }
    bool is_symbol(int id) const { return kind(id) == EntryKind::Symbol; }
    int symbol_count() const { return symbol_count_; }

    void save(const std::filesystem::path& file) const;
    static Vocab load(const std::filesystem::path& file);

private:
    struct Entry {
        std::string text;
        EntryKind kind;
    };

    Vocab();
    int add(std::string text, EntryKind kind);

    std::vector<Entry> entries_;
    std::vector<std::pair<std::string, int>> word_index_;    // sorted
    std::vector<std::pair<std::string, int>> symbol_index_;  // sorted
    int symbol_count_ = 0;

    void reindex();
};

// Per-document vocabulary extension: each distinct OOV source word gets id
// base_size + j in first-occurrence order, so the pointer can copy it.
struct ExtendedVocab {
    int base_size = 0;
    std::vector<std::string> oov_words;

    int size() const { return base_size + int(oov_words.size()); }
    int oov_id(std::string_view word) const;  // -1 if not an OOV of this document
    const std::string& text(const Vocab& vocab, int ext_id) const;
};

// Document encoded against a vocabulary, ready for the model.
struct EncodedDoc {
    std::string id;
    std::vector<int> base_ids;         // < vocab size; OOV words become unk
    std::vector<int> ext_ids;          // OOV words get extended ids
    std::vector<std::uint8_t> word_mask;
    std::vector<int> word_positions;   // token indices with word_mask set
    std::vector<int> symbol_positions;
    ExtendedVocab extended;

    int length() const { return int(base_ids.size()); }
    // Extended ids of the word positions, in word-position order.
    std::vector<int> word_ext_ids() const;
};

// (extended id sequence, per-document extension). Symbol tokens are never
// extended; a source word is always either in-vocab or extended, never unk.
std::pair<std::vector<int>, ExtendedVocab> encode_extended(const SerializedDoc& doc,
                                                           const Vocab& vocab);

EncodedDoc encode_document(const SerializedDoc& doc, const Vocab& vocab,
                           std::string doc_id = {});

// Target words to extended-aware ids: in-vocab id, else the document's
// extension id, else unk. Appends eos.
std::vector<int> encode_summary(std::span<const std::string> words, const Vocab& vocab,
                                const ExtendedVocab& ext);

}  // namespace summ
