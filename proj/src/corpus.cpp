#include "summ/corpus.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "summ/error.hpp"
#include "summ/rng.hpp"

namespace summ {

static std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream ss(text);
    std::string w;
    while (ss >> w) words.push_back(w);
    return words;
}

static std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out += ' ';
        out += words[i];
    }
    return out;
}

std::vector<Document> load_corpus(const std::filesystem::path& file, bool require_summary,
                                  bool lenient, LoadStats* stats) {
    std::ifstream in(file);
    if (!in) throw IoError("cannot open corpus file '" + file.string() + "'");

    std::vector<Document> docs;
    LoadStats local;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
            if (j.is_discarded() || !j.is_object())
                throw DataError("MalformedJson: line " + std::to_string(lineno) +
                                " is not a JSON object");
            Document d;
            if (j.contains("id")) {
                if (!j["id"].is_string())
                    throw DataError("BadField: line " + std::to_string(lineno) +
                                    " field 'id' is not a string");
                d.id = j["id"].get<std::string>();
            } else {
                d.id = "line" + std::to_string(lineno);
            }
            if (!j.contains("sentences"))
                throw DataError("MissingField: line " + std::to_string(lineno) +
                                " has no 'sentences'");
            if (!j["sentences"].is_array())
                throw DataError("BadField: line " + std::to_string(lineno) +
                                " field 'sentences' is not an array");
            for (const auto& s : j["sentences"]) {
                if (!s.is_string())
                    throw DataError("BadField: line " + std::to_string(lineno) +
                                    " has a non-string sentence");
                d.sentences.push_back(s.get<std::string>());
            }
            if (j.contains("summary")) {
                if (!j["summary"].is_string())
                    throw DataError("BadField: line " + std::to_string(lineno) +
                                    " field 'summary' is not a string");
                d.summary = split_words(j["summary"].get<std::string>());
                d.has_summary = true;
            } else if (require_summary) {
                throw DataError("MissingField: line " + std::to_string(lineno) +
                                " has no 'summary'");
            }
            docs.push_back(std::move(d));
            ++local.loaded;
        } catch (const DataError&) {
            if (!lenient) throw;
            ++local.skipped;
        }
    }
    if (stats) *stats = local;
    return docs;
}

void write_corpus(const std::filesystem::path& file, const std::vector<Document>& docs) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    for (const Document& d : docs) {
        nlohmann::json j;
        j["id"] = d.id;
        j["sentences"] = d.sentences;
        if (d.has_summary) j["summary"] = join_words(d.summary);
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing corpus to '" + file.string() + "'");
}

static void collect_leaves(const ParseTree& t, std::vector<std::string>& out) {
    if (t.is_leaf()) {
        out.push_back(t.label);
        return;
    }
    for (const ParseTree& c : t.children) collect_leaves(c, out);
}

SerializedDoc serialize_document(const Document& doc, bool no_syntax) {
    SerializedDoc out;
    for (std::size_t k = 0; k < doc.sentences.size(); ++k) {
        const std::string& sent = doc.sentences[k];
        const int begin = out.length();
        std::vector<Token> toks;
        if (sent.find('(') != std::string::npos) {
            ParseTree tree;
            try {
                tree = parse_bracketed(sent);
            } catch (const TreeParseError& e) {
                throw DataError("document '" + doc.id + "' sentence " +
                                std::to_string(k + 1) + ": " + e.what());
            }
            if (no_syntax) {
                std::vector<std::string> words;
                collect_leaves(tree, words);
                for (std::string& w : words) toks.push_back(Token{std::move(w), TokenKind::Word});
            } else {
                toks = serialize_dfs(tree, /*drop_root=*/true);
            }
        } else {
            for (std::string& w : split_words(sent)) toks.push_back(Token{std::move(w), TokenKind::Word});
        }
        for (Token& tok : toks) {
            out.word_mask.push_back(tok.kind == TokenKind::Word ? 1 : 0);
            out.tokens.push_back(std::move(tok));
        }
        out.sentence_bounds.emplace_back(begin, out.length());
    }
    if (out.tokens.empty())
        throw DataError("EmptyDocument: document '" + doc.id + "' has no tokens");
    return out;
}

SerializedDoc truncate_doc(SerializedDoc doc, int max_tokens) {
    if (max_tokens <= 0 || doc.length() <= max_tokens) return doc;
    doc.tokens.resize(std::size_t(max_tokens));
    doc.word_mask.resize(std::size_t(max_tokens));
    std::vector<std::pair<int, int>> bounds;
    for (auto [b, e] : doc.sentence_bounds) {
        if (b >= max_tokens) break;
        bounds.emplace_back(b, std::min(e, max_tokens));
    }
    doc.sentence_bounds = std::move(bounds);
    return doc;
}

// --- synthetic corpus ------------------------------------------------------

namespace {

const std::vector<std::string> kDet = {"the", "a", "every"};
const std::vector<std::string> kAdj = {"red", "small", "happy", "old", "bright", "quiet"};
const std::vector<std::string> kNoun = {"dog",   "cat",   "house",  "tree",   "bird",  "car",
                                        "book",  "river", "stone",  "garden", "window", "piano"};
const std::vector<std::string> kName = {"mary", "john", "lucy", "peter", "anna", "tomas"};
const std::vector<std::string> kVerb = {"sees",  "likes",   "hates",   "finds",
                                        "paints", "follows", "watches", "draws"};
const std::vector<std::string> kPrep = {"near", "under", "over", "behind", "beside"};

const std::string& pick(Rng& rng, const std::vector<std::string>& v) {
    return v[std::size_t(rng.below(std::uint64_t(v.size())))];
}

ParseTree leaf_under(const std::string& tag, const std::string& word) {
    return ParseTree{tag, {ParseTree{word, {}}}};
}

ParseTree gen_np(Rng& rng, bool simple) {
    const std::uint64_t pickd = rng.below(simple ? 2 : 3);
    ParseTree np{"NP", {}};
    switch (pickd) {
        case 0:
            np.children.push_back(leaf_under("DT", pick(rng, kDet)));
            np.children.push_back(leaf_under("NN", pick(rng, kNoun)));
            break;
        case 1:
            np.children.push_back(leaf_under("NNP", pick(rng, kName)));
            break;
        default:
            np.children.push_back(leaf_under("DT", pick(rng, kDet)));
            np.children.push_back(leaf_under("JJ", pick(rng, kAdj)));
            np.children.push_back(leaf_under("NN", pick(rng, kNoun)));
            break;
    }
    return np;
}

ParseTree gen_pp(Rng& rng) {
    ParseTree pp{"PP", {}};
    pp.children.push_back(leaf_under("IN", pick(rng, kPrep)));
    pp.children.push_back(gen_np(rng, /*simple=*/true));
    return pp;
}

ParseTree gen_vp(Rng& rng) {
    ParseTree vp{"VP", {}};
    vp.children.push_back(leaf_under("VBZ", pick(rng, kVerb)));
    switch (rng.below(3)) {
        case 0: vp.children.push_back(gen_np(rng, false)); break;
        case 1: vp.children.push_back(gen_pp(rng)); break;
        default:
            vp.children.push_back(gen_np(rng, false));
            vp.children.push_back(gen_pp(rng));
            break;
    }
    return vp;
}

ParseTree gen_sentence(Rng& rng) {
    ParseTree s{"S", {}};
    s.children.push_back(gen_np(rng, false));
    s.children.push_back(gen_vp(rng));
    return s;
}

void leaf_ptrs(ParseTree& t, std::vector<ParseTree*>& out) {
    if (t.is_leaf()) {
        out.push_back(&t);
        return;
    }
    for (ParseTree& c : t.children) leaf_ptrs(c, out);
}

std::string nonce_word(Rng& rng) {
    std::string w = "zz";
    for (int i = 0; i < 6; ++i) w += char('a' + rng.below(26));
    return w;
}

}  // namespace

std::vector<Document> gen_synthetic(const SynthConfig& cfg) {
    if (cfg.docs <= 0 || cfg.sentences_per_doc <= 0)
        throw DataError("BadConfig: docs and sentences_per_doc must be positive");
    if (cfg.nonce_rate < 0.0 || cfg.nonce_rate > 1.0)
        throw DataError("BadConfig: nonce_rate must be in [0, 1]");

    Rng base(cfg.seed);
    std::vector<Document> docs;
    docs.reserve(std::size_t(cfg.docs));
    for (int i = 0; i < cfg.docs; ++i) {
        Rng rng = base.fork(std::uint64_t(i));
        std::vector<ParseTree> trees;
        for (int s = 0; s < cfg.sentences_per_doc; ++s) trees.push_back(gen_sentence(rng));

        if (rng.next_double() < cfg.nonce_rate) {
            std::vector<ParseTree*> leaves;
            leaf_ptrs(trees.front(), leaves);
            leaves[std::size_t(rng.below(std::uint64_t(leaves.size())))]->label = nonce_word(rng);
        }

        Document d;
        char buf[32];
        std::snprintf(buf, sizeof buf, "synth-%05d", i);
        d.id = buf;
        for (const ParseTree& t : trees) d.sentences.push_back(pretty_print(t));

        std::vector<std::string> words;
        if (cfg.task == SynthTask::CopyFirstSentence) {
            collect_leaves(trees.front(), words);
        } else {
            for (const ParseTree& t : trees) {
                collect_leaves(t, words);
                if (int(words.size()) >= cfg.copy_k) break;
            }
            if (int(words.size()) > cfg.copy_k) words.resize(std::size_t(cfg.copy_k));
        }
        d.summary = std::move(words);
        d.has_summary = true;
        docs.push_back(std::move(d));
    }
    return docs;
}

// --- checkpoints -----------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'S', 'D', 'S', 'E'};
constexpr std::uint32_t kVersion = 1;
const std::string kMetaName = "meta/hparams";

void put_u32(std::string& out, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out += char((v >> (8 * k)) & 0xff);
}

void put_f64(std::string& out, double d) {
    const auto bits = std::bit_cast<std::uint64_t>(d);
    for (int k = 0; k < 8; ++k) out += char((bits >> (8 * k)) & 0xff);
}

void put_record(std::ofstream& os, const std::string& name, const Tensor& t) {
    std::string buf;
    buf.reserve(16 + name.size() + std::size_t(t.size()) * 8);
    put_u32(buf, std::uint32_t(name.size()));
    buf += name;
    put_u32(buf, 2);
    put_u32(buf, std::uint32_t(t.rows()));
    put_u32(buf, std::uint32_t(t.cols()));
    for (double d : t.flat()) put_f64(buf, d);
    os.write(buf.data(), std::streamsize(buf.size()));
}

struct Reader {
    std::ifstream in;
    explicit Reader(const std::filesystem::path& file) : in(file, std::ios::binary) {
        if (!in) throw IoError("cannot open checkpoint '" + file.string() + "'");
    }
    // Returns false on clean EOF, throws if the stream ends mid-item.
    bool read_exact(char* dst, std::streamsize n, bool allow_eof) {
        in.read(dst, n);
        if (in.gcount() == n) return true;
        if (allow_eof && in.gcount() == 0 && in.eof()) return false;
        throw DataError("TruncatedPayload: checkpoint ends mid-record");
    }
    bool u32(std::uint32_t& v, bool allow_eof = false) {
        char b[4];
        if (!read_exact(b, 4, allow_eof)) return false;
        v = 0;
        for (int k = 0; k < 4; ++k) v |= std::uint32_t(std::uint8_t(b[k])) << (8 * k);
        return true;
    }
    double f64() {
        char b[8];
        read_exact(b, 8, false);
        std::uint64_t bits = 0;
        for (int k = 0; k < 8; ++k) bits |= std::uint64_t(std::uint8_t(b[k])) << (8 * k);
        return std::bit_cast<double>(bits);
    }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& file, const ModelParams& params,
                     const std::vector<Tensor>* accumulators, const CheckpointMeta& meta) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw IoError("cannot open '" + file.string() + "' for writing");
    os.write(kMagic, 4);
    std::string head;
    put_u32(head, kVersion);
    os.write(head.data(), std::streamsize(head.size()));

    Tensor hp(1, 8);
    hp(0, 0) = meta.dims.hidden;
    hp(0, 1) = meta.dims.embed;
    hp(0, 2) = meta.dims.vocab;
    hp(0, 3) = meta.dims.resolved_out_hidden();
    hp(0, 4) = meta.ablations.no_syntax ? 1 : 0;
    hp(0, 5) = meta.ablations.static_gate ? 1 : 0;
    hp(0, 6) = meta.ablations.no_gate ? 1 : 0;
    put_record(os, kMetaName, hp);

    auto named = params.named_tensors();
    for (const auto& [name, tensor] : named) put_record(os, name, *tensor);
    if (accumulators) {
        if (accumulators->size() != named.size())
            throw ShapeError("ShapeMismatch: optimizer state has " +
                             std::to_string(accumulators->size()) + " tensors, expected " +
                             std::to_string(named.size()));
        for (std::size_t i = 0; i < named.size(); ++i)
            put_record(os, "opt/" + named[i].first, (*accumulators)[i]);
    }
    if (!os) throw IoError("failed writing checkpoint to '" + file.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& file, const ModelDims* expected) {
    Reader r(file);
    char magic[4];
    r.read_exact(magic, 4, false);
    if (std::string_view(magic, 4) != std::string_view(kMagic, 4))
        throw DataError("BadMagic: '" + file.string() + "' is not a checkpoint file");
    std::uint32_t version = 0;
    r.u32(version);
    if (version != kVersion)
        throw DataError("UnsupportedVersion: checkpoint version " + std::to_string(version) +
                        ", expected " + std::to_string(kVersion));

    auto read_record = [&r](std::string& name, Tensor& t, bool allow_eof) -> bool {
        std::uint32_t name_len = 0;
        if (!r.u32(name_len, allow_eof)) return false;
        if (name_len == 0 || name_len > (1u << 20))
            throw DataError("BadRecord: implausible name length " + std::to_string(name_len));
        name.resize(name_len);
        r.read_exact(name.data(), std::streamsize(name_len), false);
        std::uint32_t rank = 0;
        r.u32(rank);
        if (rank != 2)
            throw DataError("BadRecord: tensor '" + name + "' has rank " + std::to_string(rank));
        std::uint32_t rows = 0, cols = 0;
        r.u32(rows);
        r.u32(cols);
        if (rows == 0 || cols == 0 || std::uint64_t(rows) * cols > (1u << 28))
            throw DataError("BadRecord: tensor '" + name + "' has implausible shape");
        t = Tensor(int(rows), int(cols));
        for (double& d : t.flat()) d = r.f64();
        return true;
    };

    std::string name;
    Tensor tensor;
    if (!read_record(name, tensor, true) || name != kMetaName)
        throw DataError("BadRecord: first checkpoint record must be '" + kMetaName + "'");
    if (tensor.rows() != 1 || tensor.cols() < 7)
        throw DataError("BadRecord: malformed '" + kMetaName + "' record");

    CheckpointMeta meta;
    meta.dims.hidden = int(tensor(0, 0));
    meta.dims.embed = int(tensor(0, 1));
    meta.dims.vocab = int(tensor(0, 2));
    meta.dims.out_hidden = int(tensor(0, 3));
    meta.ablations.no_syntax = tensor(0, 4) != 0;
    meta.ablations.static_gate = tensor(0, 5) != 0;
    meta.ablations.no_gate = tensor(0, 6) != 0;

    Checkpoint ck;
    ck.meta = meta;
    ck.params = ModelParams::with_shapes(expected ? *expected : meta.dims);

    std::map<std::string, Tensor*> slots;
    for (auto& [n, t] : ck.params.named_tensors()) slots[n] = t;
    std::map<std::string, Tensor> opt;
    std::set<std::string> seen;

    while (read_record(name, tensor, true)) {
        const bool is_opt = name.rfind("opt/", 0) == 0;
        const std::string base = is_opt ? name.substr(4) : name;
        auto it = slots.find(base);
        if (it == slots.end())
            throw DataError("UnknownTensor: checkpoint record '" + name + "'");
        if (!seen.insert(name).second)
            throw DataError("DuplicateTensor: checkpoint record '" + name + "'");
        if (tensor.rows() != it->second->rows() || tensor.cols() != it->second->cols())
            throw DataError("ShapeMismatch: tensor '" + name + "' in checkpoint is " +
                            tensor.shape_str() + " but expected " + it->second->shape_str());
        if (is_opt)
            opt[base] = std::move(tensor);
        else
            *it->second = std::move(tensor);
    }

    for (const auto& [n, t] : slots) {
        (void)t;
        if (!seen.count(n)) throw DataError("MissingTensor: checkpoint lacks '" + n + "'");
    }
    if (!opt.empty()) {
        for (const auto& [n, t] : slots) {
            (void)t;
            if (!opt.count(n))
                throw DataError("MissingTensor: checkpoint lacks optimizer state 'opt/" + n + "'");
        }
        for (auto& [n, t] : ck.params.named_tensors()) {
            (void)t;
            ck.accumulators.push_back(std::move(opt.at(n)));
        }
    }
    return ck;
}

}  // namespace summ
