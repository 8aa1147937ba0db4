// summ: train, run and inspect the selective-encoding summarizer.
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "summ/decode.hpp"
#include "summ/error.hpp"
#include "summ/rouge.hpp"
#include "summ/train.hpp"

using namespace summ;

namespace {

// Bad flags and bad config files are usage errors (exit 1), not data errors.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ostream& log_line() { return std::cerr; }

std::string trimmed(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// key=value lines fill any option not given on the command line; unknown keys
// are fatal. '#' starts a comment line.
void apply_config(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string entry = trimmed(line);
        if (entry.empty() || entry[0] == '#') continue;
        const auto where = path + ":" + std::to_string(line_no);
        const auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw UsageError("expected key=value at " + where);
        const std::string key = trimmed(entry.substr(0, eq));
        const std::string value = trimmed(entry.substr(eq + 1));
        if (key.empty()) throw UsageError("empty key at " + where);
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt) throw UsageError("unknown config key '" + key + "' at " + where);
        if (opt->count() > 0) continue;  // explicit flags override the file
        opt->add_result(value);
        opt->run_callback();
    }
}

void config_kv(const std::string& key, const std::string& value) {
    std::cerr << "[config] " << key << " = " << value << '\n';
}
void config_kv(const std::string& key, const char* value) { config_kv(key, std::string(value)); }
void config_kv(const std::string& key, int value) { config_kv(key, std::to_string(value)); }
void config_kv(const std::string& key, std::uint64_t value) {
    config_kv(key, std::to_string(value));
}
void config_kv(const std::string& key, double value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    config_kv(key, std::string(buf));
}
void config_kv(const std::string& key, bool value) {
    config_kv(key, value ? "true" : "false");
}

void config_ablations(const Ablations& ab) {
    config_kv("no-syntax", ab.no_syntax);
    config_kv("static-gate", ab.static_gate);
    config_kv("no-gate", ab.no_gate);
    config_kv("no-coverage", ab.no_coverage);
}

void add_ablation_flags(CLI::App* cmd, Ablations& ab) {
    cmd->add_flag("--no-syntax", ab.no_syntax, "drop parsing symbols and the syntactic vector");
    cmd->add_flag("--static-gate", ab.static_gate, "one per-document gate instead of per-step");
    cmd->add_flag("--no-gate", ab.no_gate, "pass encoder states through ungated");
    cmd->add_flag("--no-coverage", ab.no_coverage, "drop the coverage loss term");
}

// Every subcommand reads an optional key=value file; explicit flags win.
void add_config_file(CLI::App* cmd, std::string& path) {
    cmd->add_option("--config", path, "key=value file with defaults for this command");
}

void require_opt(const std::string& value, const char* flag) {
    if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

std::unique_ptr<std::ofstream> open_artifact(const std::string& path, std::ostream*& out) {
    if (path.empty() || path == "-") {
        out = &std::cout;
        return nullptr;
    }
    auto file = std::make_unique<std::ofstream>(path);
    if (!*file) throw IoError("cannot open '" + path + "' for writing");
    out = file.get();
    return file;
}

// --- gen-synthetic ---------------------------------------------------------

struct GenOpts {
    std::string config;
    SynthConfig synth;
    std::string task = "copy_first_sentence";
    std::string out;
};

int run_gen(GenOpts& o) {
    require_opt(o.out, "--out");
    o.synth.task = o.task == "copy_first_k_words" ? SynthTask::CopyFirstKWords
                                                  : SynthTask::CopyFirstSentence;
    config_kv("command", "gen-synthetic");
    config_kv("docs", o.synth.docs);
    config_kv("sentences", o.synth.sentences_per_doc);
    config_kv("nonce-rate", o.synth.nonce_rate);
    config_kv("task", o.task);
    config_kv("copy-k", o.synth.copy_k);
    config_kv("seed", o.synth.seed);
    config_kv("out", o.out);

    std::vector<Document> docs = gen_synthetic(o.synth);
    write_corpus(o.out, docs);
    log_line() << "wrote " << docs.size() << " documents to " << o.out << '\n';
    return 0;
}

// --- preprocess ------------------------------------------------------------

struct PreOpts {
    std::string config;
    std::string corpus;
    std::string out;
    int max_words = 50000;
    bool no_syntax = false;
    bool lenient = false;
};

int run_preprocess(PreOpts& o) {
    require_opt(o.corpus, "--corpus");
    require_opt(o.out, "--out");
    config_kv("command", "preprocess");
    config_kv("corpus", o.corpus);
    config_kv("out", o.out);
    config_kv("max-words", o.max_words);
    config_kv("no-syntax", o.no_syntax);
    config_kv("lenient", o.lenient);

    LoadStats stats;
    std::vector<Document> docs = load_corpus(o.corpus, /*require_summary=*/false, o.lenient,
                                             &stats);
    std::vector<SerializedDoc> sers;
    sers.reserve(docs.size());
    std::size_t tokens = 0, words = 0;
    for (const Document& d : docs) {
        sers.push_back(serialize_document(d, o.no_syntax));
        tokens += std::size_t(sers.back().length());
        words += std::size_t(sers.back().word_count());
    }
    Vocab vocab = Vocab::build(sers, o.max_words);
    vocab.save(o.out);

    log_line() << "documents " << stats.loaded << " (skipped " << stats.skipped << "), tokens "
               << tokens << ", words " << words << '\n';
    log_line() << "vocab size " << vocab.size() << " (" << vocab.symbol_count()
               << " parsing symbols) -> " << o.out << '\n';
    return 0;
}

// --- train -----------------------------------------------------------------

struct TrainOpts {
    std::string config;
    std::string corpus;
    std::string out;
    std::string vocab_in;  // prebuilt vocab; built from the corpus when empty
    std::string curve;     // defaults to <out>.curve.tsv
    int max_words = 50000;
    bool lenient = false;
    TrainConfig cfg;
};

int run_train(TrainOpts& o) {
    require_opt(o.corpus, "--corpus");
    require_opt(o.out, "--out");
    if (o.curve.empty()) o.curve = o.out + ".curve.tsv";
    config_kv("command", "train");
    config_kv("corpus", o.corpus);
    config_kv("out", o.out);
    config_kv("vocab", o.vocab_in.empty() ? std::string("<built from corpus>") : o.vocab_in);
    config_kv("curve", o.curve);
    config_kv("max-words", o.max_words);
    config_kv("lenient", o.lenient);
    config_kv("hidden", o.cfg.dims.hidden);
    config_kv("embed", o.cfg.dims.embed);
    config_kv("out-hidden", o.cfg.dims.resolved_out_hidden());
    config_kv("steps", o.cfg.steps);
    config_kv("learning-rate", o.cfg.learning_rate);
    config_kv("accumulator-init", o.cfg.accumulator_init);
    config_kv("clip-norm", o.cfg.clip_norm);
    config_kv("coverage-weight", o.cfg.coverage_weight);
    config_kv("max-src", o.cfg.max_src_tokens);
    config_kv("max-tgt", o.cfg.max_tgt_words);
    config_kv("seed", o.cfg.seed);
    config_kv("log-every", o.cfg.log_every);
    config_kv("checkpoint-every", o.cfg.checkpoint_every);
    config_ablations(o.cfg.ablations);

    LoadStats stats;
    std::vector<Document> docs = load_corpus(o.corpus, /*require_summary=*/true, o.lenient,
                                             &stats);
    if (stats.skipped > 0) log_line() << "skipped " << stats.skipped << " bad lines\n";

    Vocab vocab = [&] {
        if (!o.vocab_in.empty()) return Vocab::load(o.vocab_in);
        std::vector<SerializedDoc> sers;
        sers.reserve(docs.size());
        for (const Document& d : docs)
            sers.push_back(serialize_document(d, o.cfg.ablations.no_syntax));
        return Vocab::build(sers, o.max_words);
    }();
    o.cfg.dims.vocab = vocab.size();
    log_line() << "vocab size " << vocab.size() << ", training on " << docs.size()
               << " documents\n";

    std::vector<TrainExample> examples;
    examples.reserve(docs.size());
    for (const Document& d : docs)
        examples.push_back(make_example(d, vocab, o.cfg.ablations, o.cfg.max_src_tokens,
                                        o.cfg.max_tgt_words));

    const CheckpointMeta meta{o.cfg.dims, o.cfg.ablations};
    auto sink = [&](int step, const ModelParams& p, const OptimizerState& opt) {
        save_checkpoint(o.out, p, &opt.acc, meta);
        log_line() << "checkpoint at step " << step << " -> " << o.out << '\n';
    };
    TrainResult result = train_loop(o.cfg, examples, &log_line(), sink);

    save_checkpoint(o.out, result.params, &result.opt.acc, meta);
    vocab.save(o.out + ".vocab");
    write_curve(o.curve, result.curve);
    log_line() << "model -> " << o.out << ", vocab -> " << o.out << ".vocab, curve -> "
               << o.curve << '\n';
    return 0;
}

// --- summarize -------------------------------------------------------------

struct SummarizeOpts {
    std::string config;
    std::string model;
    std::string corpus;
    std::string vocab;  // defaults to <model>.vocab
    std::string out;    // empty: stdout
    int beam = 4;
    int max_len = 120;
    int max_src = 1200;
    bool lenient = false;
};

int run_summarize(SummarizeOpts& o) {
    require_opt(o.model, "--model");
    require_opt(o.corpus, "--corpus");
    if (o.vocab.empty()) o.vocab = o.model + ".vocab";
    config_kv("command", "summarize");
    config_kv("model", o.model);
    config_kv("corpus", o.corpus);
    config_kv("vocab", o.vocab);
    config_kv("out", o.out.empty() ? "-" : o.out);
    config_kv("beam", o.beam);
    config_kv("max-len", o.max_len);
    config_kv("max-src", o.max_src);
    config_kv("lenient", o.lenient);

    Checkpoint ck = load_checkpoint(o.model);
    config_ablations(ck.meta.ablations);
    Vocab vocab = Vocab::load(o.vocab);
    std::vector<Document> docs = load_corpus(o.corpus, /*require_summary=*/false, o.lenient);

    std::ostream* out = nullptr;
    auto file = open_artifact(o.out, out);

    BeamConfig bc;
    bc.width = o.beam;
    bc.max_len = o.max_len;
    int n = 0;
    for (const Document& d : docs) {
        SerializedDoc ser =
            truncate_doc(serialize_document(d, ck.meta.ablations.no_syntax), o.max_src);
        EncodedDoc enc = encode_document(ser, vocab, d.id);
        DecodeResult res = beam_decode(ck.params, enc, ck.meta.ablations, bc, vocab);
        std::string text;
        for (std::size_t i = 0; i < res.words.size(); ++i) {
            if (i) text += ' ';
            text += res.words[i];
        }
        nlohmann::json line = {{"id", d.id}, {"summary", text}};
        *out << line.dump() << '\n';
        if (++n % 10 == 0) log_line() << "decoded " << n << "/" << docs.size() << '\n';
    }
    if (!*out) throw IoError("failed writing summaries");
    log_line() << "decoded " << n << " documents\n";
    return 0;
}

// --- evaluate --------------------------------------------------------------

struct EvalOpts {
    std::string config;
    std::string candidates;
    std::string references;
    std::string out;  // empty: stdout
};

// id -> summary text from {"id", "summary"} JSON lines; the summary may be a
// string or a word array.
std::map<std::string, std::string> load_summaries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto where = [&] { return path + ":" + std::to_string(line_no); };
        nlohmann::json j = nlohmann::json::parse(line, nullptr, /*allow_exceptions=*/false);
        if (j.is_discarded()) throw DataError("MalformedJson at " + where());
        if (!j.contains("id") || !j["id"].is_string())
            throw DataError("MissingField 'id' at " + where());
        if (!j.contains("summary")) throw DataError("MissingField 'summary' at " + where());
        std::string text;
        if (j["summary"].is_string()) {
            text = j["summary"].get<std::string>();
        } else if (j["summary"].is_array()) {
            for (const auto& w : j["summary"]) {
                if (!w.is_string()) throw DataError("BadField 'summary' at " + where());
                if (!text.empty()) text += ' ';
                text += w.get<std::string>();
            }
        } else {
            throw DataError("BadField 'summary' at " + where());
        }
        if (!out.emplace(j["id"].get<std::string>(), std::move(text)).second)
            throw DataError("DuplicateId '" + j["id"].get<std::string>() + "' at " + where());
    }
    return out;
}

int run_evaluate(EvalOpts& o) {
    require_opt(o.candidates, "--candidates");
    require_opt(o.references, "--references");
    config_kv("command", "evaluate");
    config_kv("candidates", o.candidates);
    config_kv("references", o.references);
    config_kv("out", o.out.empty() ? "-" : o.out);

    const auto cands = load_summaries(o.candidates);
    const auto refs = load_summaries(o.references);
    if (refs.empty()) throw DataError("EmptyCorpus: no references in '" + o.references + "'");

    double sums[3][3] = {};  // metric x {precision, recall, f1}
    int degenerate = 0;
    for (const auto& [id, ref_text] : refs) {
        auto it = cands.find(id);
        if (it == cands.end()) throw DataError("MissingCandidate for id '" + id + "'");
        const auto cand = rouge_tokenize(it->second);
        const auto ref = rouge_tokenize(ref_text);
        const RougeScore scores[3] = {rouge_n(cand, ref, 1), rouge_n(cand, ref, 2),
                                      rouge_l(cand, ref)};
        for (int m = 0; m < 3; ++m) {
            if (scores[m].degenerate) ++degenerate;
            sums[m][0] += scores[m].precision;
            sums[m][1] += scores[m].recall;
            sums[m][2] += scores[m].f1;
        }
    }

    std::ostream* out = nullptr;
    auto file = open_artifact(o.out, out);
    const char* names[3] = {"rouge_1", "rouge_2", "rouge_l"};
    *out << "metric\tprecision\trecall\tf1\n";
    char buf[64];
    for (int m = 0; m < 3; ++m) {
        *out << names[m];
        for (int k = 0; k < 3; ++k) {
            std::snprintf(buf, sizeof buf, "\t%.6f", sums[m][k] / double(refs.size()));
            *out << buf;
        }
        *out << '\n';
    }
    log_line() << "scored " << refs.size() << " pairs";
    if (degenerate > 0) log_line() << " (" << degenerate << " degenerate scores counted as 0)";
    log_line() << '\n';
    return 0;
}

// --- gradcheck -------------------------------------------------------------

struct GradOpts {
    std::string config;
    int hidden = 8;
    int embed = 6;
    int vocab = 24;
    int max_src = 15;
    int max_tgt = 4;
    double eps = 1e-5;
    double tolerance = 1e-4;
    double coverage_weight = 1.0;
    std::uint64_t seed = 1;
    Ablations ablations;
};

int run_gradcheck(GradOpts& o) {
    config_kv("command", "gradcheck");
    config_kv("hidden", o.hidden);
    config_kv("embed", o.embed);
    config_kv("vocab", o.vocab);
    config_kv("max-src", o.max_src);
    config_kv("max-tgt", o.max_tgt);
    config_kv("eps", o.eps);
    config_kv("tolerance", o.tolerance);
    config_kv("coverage-weight", o.coverage_weight);
    config_kv("seed", o.seed);
    config_ablations(o.ablations);

    // Tiny synthetic example; the vocab comes from a nonce-free twin corpus so
    // the example's nonce word exercises the copy path as a true OOV.
    SynthConfig sc;
    sc.docs = 1;
    sc.sentences_per_doc = 1;
    sc.nonce_rate = 1.0;
    sc.seed = o.seed;
    std::vector<Document> docs = gen_synthetic(sc);
    sc.nonce_rate = 0.0;
    std::vector<SerializedDoc> sers;
    for (const Document& d : gen_synthetic(sc))
        sers.push_back(serialize_document(d, o.ablations.no_syntax));
    Vocab vocab = Vocab::build(sers, o.vocab);

    ModelDims dims;
    dims.hidden = o.hidden;
    dims.embed = o.embed;
    dims.vocab = vocab.size();
    TrainExample ex = make_example(docs[0], vocab, o.ablations, o.max_src, o.max_tgt);
    log_line() << "checking " << ex.doc.length() << " source tokens, " << ex.target.size()
               << " target tokens, vocab " << dims.vocab << '\n';

    GradCheckReport rep = model_grad_check(dims, o.ablations, ex.doc, ex.target,
                                           o.coverage_weight, o.eps, o.tolerance, o.seed);
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "max relative error %.3e at %s[%zu] (analytic %.10e, numeric %.10e)",
                  rep.max_rel_err, rep.worst_name.c_str(), rep.worst_index, rep.worst_analytic,
                  rep.worst_numeric);
    std::cout << buf << '\n';
    std::cout << (rep.passed ? "PASS" : "FAIL") << " (tolerance "
              << o.tolerance << ")\n";
    return rep.passed ? 0 : 3;
}

// --- trace-gates -----------------------------------------------------------

struct TraceOpts {
    std::string config;
    std::string model;
    std::string corpus;
    std::string vocab;   // defaults to <model>.vocab
    std::string doc_id;  // empty: first document
    std::string out;     // empty: stdout
    int max_src = 1200;
    int max_len = 120;
};

int run_trace(TraceOpts& o) {
    require_opt(o.model, "--model");
    require_opt(o.corpus, "--corpus");
    if (o.vocab.empty()) o.vocab = o.model + ".vocab";
    config_kv("command", "trace-gates");
    config_kv("model", o.model);
    config_kv("corpus", o.corpus);
    config_kv("vocab", o.vocab);
    config_kv("doc", o.doc_id.empty() ? std::string("<first>") : o.doc_id);
    config_kv("out", o.out.empty() ? "-" : o.out);
    config_kv("max-src", o.max_src);
    config_kv("max-len", o.max_len);

    Checkpoint ck = load_checkpoint(o.model);
    config_ablations(ck.meta.ablations);
    Vocab vocab = Vocab::load(o.vocab);
    std::vector<Document> docs = load_corpus(o.corpus, /*require_summary=*/false);

    const Document* doc = nullptr;
    for (const Document& d : docs)
        if (o.doc_id.empty() || d.id == o.doc_id) {
            doc = &d;
            break;
        }
    if (!doc) throw DataError("UnknownDocument '" + o.doc_id + "' in '" + o.corpus + "'");

    SerializedDoc ser =
        truncate_doc(serialize_document(*doc, ck.meta.ablations.no_syntax), o.max_src);
    EncodedDoc enc = encode_document(ser, vocab, doc->id);

    // Follow the gold summary when there is one, otherwise the model's own
    // beam output.
    std::vector<int> forced;
    std::vector<std::string> labels;
    if (doc->has_summary) {
        forced = encode_summary(doc->summary, vocab, enc.extended);
    } else {
        BeamConfig bc;
        bc.max_len = o.max_len;
        DecodeResult res = beam_decode(ck.params, enc, ck.meta.ablations, bc, vocab);
        forced = res.ext_ids;
        forced.push_back(Vocab::eos_id);
    }
    for (int id : forced) labels.push_back(enc.extended.text(vocab, id));

    GateTrace trace = trace_gates(ck.params, enc, forced, ck.meta.ablations);

    std::ostream* out = nullptr;
    auto file = open_artifact(o.out, out);
    *out << "step\ttoken";
    for (int pos : enc.word_positions) *out << '\t' << ser.tokens[std::size_t(pos)].text;
    *out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < trace.rows.size(); ++r) {
        *out << r << '\t' << (r == 0 ? "<init>" : labels[r - 1]);
        for (double v : trace.rows[r]) {
            std::snprintf(buf, sizeof buf, "\t%.6f", v);
            *out << buf;
        }
        *out << '\n';
    }
    log_line() << "document '" << doc->id << "': " << trace.rows.size() << " rows, "
               << enc.word_positions.size() << " word positions, step variability "
               << trace_step_variability(trace) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"syntactic + selective-encoding neural summarizer"};
    app.require_subcommand(1);

    GenOpts gen;
    CLI::App* cmd = app.add_subcommand("gen-synthetic", "generate a toy parsed corpus");
    add_config_file(cmd, gen.config);
    cmd->add_option("--docs", gen.synth.docs, "number of documents");
    cmd->add_option("--sentences", gen.synth.sentences_per_doc, "sentences per document");
    cmd->add_option("--nonce-rate", gen.synth.nonce_rate, "chance of an unseen word per doc")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--task", gen.task, "gold summary rule")
        ->check(CLI::IsMember({"copy_first_sentence", "copy_first_k_words"}));
    cmd->add_option("--copy-k", gen.synth.copy_k, "words copied by copy_first_k_words");
    cmd->add_option("--seed", gen.synth.seed, "corpus seed");
    cmd->add_option("--out", gen.out, "output JSONL path");
    cmd->callback([&gen, c = cmd] {
        apply_config(c, gen.config);
        run_gen(gen);
    });

    PreOpts pre;
    cmd = app.add_subcommand("preprocess", "build and save a vocabulary");
    add_config_file(cmd, pre.config);
    cmd->add_option("--corpus", pre.corpus, "JSONL corpus");
    cmd->add_option("--out", pre.out, "vocabulary output path");
    cmd->add_option("--max-words", pre.max_words, "word vocabulary cap");
    cmd->add_flag("--no-syntax", pre.no_syntax, "strip parsing symbols");
    cmd->add_flag("--lenient", pre.lenient, "skip malformed corpus lines");
    cmd->callback([&pre, c = cmd] {
        apply_config(c, pre.config);
        run_preprocess(pre);
    });

    TrainOpts tr;
    cmd = app.add_subcommand("train", "train a model");
    add_config_file(cmd, tr.config);
    cmd->add_option("--corpus", tr.corpus, "JSONL training corpus");
    cmd->add_option("--out", tr.out, "checkpoint output path");
    cmd->add_option("--vocab", tr.vocab_in, "prebuilt vocabulary (default: build from corpus)");
    cmd->add_option("--curve", tr.curve, "loss curve TSV (default: <out>.curve.tsv)");
    cmd->add_option("--max-words", tr.max_words, "word vocabulary cap when building");
    cmd->add_flag("--lenient", tr.lenient, "skip malformed corpus lines");
    cmd->add_option("--hidden", tr.cfg.dims.hidden, "LSTM hidden size");
    cmd->add_option("--embed", tr.cfg.dims.embed, "embedding size");
    cmd->add_option("--out-hidden", tr.cfg.dims.out_hidden,
                    "vocab projection hidden size (0: same as --hidden)");
    cmd->add_option("--steps", tr.cfg.steps, "training steps");
    cmd->add_option("--learning-rate", tr.cfg.learning_rate, "adagrad learning rate");
    cmd->add_option("--accumulator-init", tr.cfg.accumulator_init, "adagrad accumulator start");
    cmd->add_option("--clip-norm", tr.cfg.clip_norm, "global gradient norm cap (<=0: off)");
    cmd->add_option("--coverage-weight", tr.cfg.coverage_weight, "coverage loss weight");
    cmd->add_option("--max-src", tr.cfg.max_src_tokens, "source token cap");
    cmd->add_option("--max-tgt", tr.cfg.max_tgt_words, "target word cap");
    cmd->add_option("--seed", tr.cfg.seed, "init and shuffling seed");
    cmd->add_option("--log-every", tr.cfg.log_every, "loss curve cadence");
    cmd->add_option("--checkpoint-every", tr.cfg.checkpoint_every,
                    "periodic checkpoint cadence (0: only final)");
    add_ablation_flags(cmd, tr.cfg.ablations);
    cmd->callback([&tr, c = cmd] {
        apply_config(c, tr.config);
        run_train(tr);
    });

    SummarizeOpts su;
    cmd = app.add_subcommand("summarize", "decode summaries for a corpus");
    add_config_file(cmd, su.config);
    cmd->add_option("--model", su.model, "checkpoint path");
    cmd->add_option("--corpus", su.corpus, "JSONL corpus to summarize");
    cmd->add_option("--vocab", su.vocab, "vocabulary (default: <model>.vocab)");
    cmd->add_option("--out", su.out, "output JSONL ('-' or empty: stdout)");
    cmd->add_option("--beam", su.beam, "beam width")->check(CLI::PositiveNumber);
    cmd->add_option("--max-len", su.max_len, "decode step cap");
    cmd->add_option("--max-src", su.max_src, "source token cap");
    cmd->add_flag("--lenient", su.lenient, "skip malformed corpus lines");
    cmd->callback([&su, c = cmd] {
        apply_config(c, su.config);
        run_summarize(su);
    });

    EvalOpts ev;
    cmd = app.add_subcommand("evaluate", "average candidate-vs-reference overlap scores");
    add_config_file(cmd, ev.config);
    cmd->add_option("--candidates", ev.candidates, "candidate summaries JSONL");
    cmd->add_option("--references", ev.references, "reference summaries JSONL");
    cmd->add_option("--out", ev.out, "output TSV ('-' or empty: stdout)");
    cmd->callback([&ev, c = cmd] {
        apply_config(c, ev.config);
        run_evaluate(ev);
    });

    GradOpts gc;
    cmd = app.add_subcommand("gradcheck",
                             "compare tape gradients against finite differences");
    add_config_file(cmd, gc.config);
    cmd->add_option("--hidden", gc.hidden, "LSTM hidden size");
    cmd->add_option("--embed", gc.embed, "embedding size");
    cmd->add_option("--vocab", gc.vocab, "word vocabulary cap");
    cmd->add_option("--max-src", gc.max_src, "source token cap");
    cmd->add_option("--max-tgt", gc.max_tgt, "target word cap");
    cmd->add_option("--eps", gc.eps, "finite-difference step");
    cmd->add_option("--tolerance", gc.tolerance, "max allowed relative error");
    cmd->add_option("--coverage-weight", gc.coverage_weight, "coverage loss weight");
    cmd->add_option("--seed", gc.seed, "example and parameter seed");
    add_ablation_flags(cmd, gc.ablations);
    int grad_rc = 0;
    cmd->callback([&gc, &grad_rc, c = cmd] {
        apply_config(c, gc.config);
        grad_rc = run_gradcheck(gc);
    });

    TraceOpts tg;
    cmd = app.add_subcommand("trace-gates", "per-step gate activity for one document");
    add_config_file(cmd, tg.config);
    cmd->add_option("--model", tg.model, "checkpoint path");
    cmd->add_option("--corpus", tg.corpus, "JSONL corpus");
    cmd->add_option("--vocab", tg.vocab, "vocabulary (default: <model>.vocab)");
    cmd->add_option("--doc", tg.doc_id, "document id (default: first)");
    cmd->add_option("--out", tg.out, "output TSV ('-' or empty: stdout)");
    cmd->add_option("--max-src", tg.max_src, "source token cap");
    cmd->add_option("--max-len", tg.max_len, "decode cap when no gold summary exists");
    cmd->callback([&tg, c = cmd] {
        apply_config(c, tg.config);
        run_trace(tg);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\nRun with --help for usage.\n";
        return 1;
    } catch (const UsageError& e) {
        std::cerr << e.what() << "\nRun with --help for usage.\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const TreeParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return grad_rc;
}
