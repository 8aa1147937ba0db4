#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "summ/model.hpp"
#include "summ/syntax.hpp"

namespace summ {

// One corpus line: sentences are bracketed parse trees, or plain text when a
// sentence contains no '('.
struct Document {
    std::string id;
    std::vector<std::string> sentences;
    std::vector<std::string> summary;  // whitespace-split words
    bool has_summary = false;
};

struct LoadStats {
    int loaded = 0;
    int skipped = 0;
};

// Reads JSONL: {"id": ..., "sentences": [...], "summary": ...}. Errors name
// the 1-based line: MalformedJson, MissingField, BadField. With lenient, bad
// lines are counted in stats.skipped instead.
std::vector<Document> load_corpus(const std::filesystem::path& file, bool require_summary,
                                  bool lenient = false, LoadStats* stats = nullptr);

void write_corpus(const std::filesystem::path& file, const std::vector<Document>& docs);

// Sentence strings to the model-facing token stream. Bracketed sentences are
// parsed and serialized depth-first; plain sentences contribute bare words.
// With no_syntax, parsing symbols are stripped and only words remain.
SerializedDoc serialize_document(const Document& doc, bool no_syntax);

// Truncation to a token budget keeps whole-prefix tokens only.
SerializedDoc truncate_doc(SerializedDoc doc, int max_tokens);

enum class SynthTask { CopyFirstSentence, CopyFirstKWords };

struct SynthConfig {
    int docs = 500;
    int sentences_per_doc = 3;
    double nonce_rate = 0.1;  // chance a document gets a fresh unseen word
    SynthTask task = SynthTask::CopyFirstSentence;
    int copy_k = 8;  // words, for CopyFirstKWords
    std::uint64_t seed = 0;
};

// Deterministic toy corpus from a small context-free grammar. Nonce words are
// injected into the first sentence so they land inside the gold summary.
std::vector<Document> gen_synthetic(const SynthConfig& cfg);

// --- model checkpoints -----------------------------------------------------

struct CheckpointMeta {
    ModelDims dims;
    Ablations ablations;
};

struct Checkpoint {
    ModelParams params;
    std::vector<Tensor> accumulators;  // for_each_param order; empty if absent
    CheckpointMeta meta;

    bool has_optimizer() const { return !accumulators.empty(); }
};

// Binary format: magic "SDSE", u32 version 1, then length-prefixed named f64
// tensor records, all little-endian. Byte-identical for identical inputs.
void save_checkpoint(const std::filesystem::path& file, const ModelParams& params,
                     const std::vector<Tensor>* accumulators, const CheckpointMeta& meta);

// Errors: BadMagic, UnsupportedVersion, TruncatedPayload, UnknownTensor,
// MissingTensor, ShapeMismatch (naming the tensor). If expected is given the
// stored shapes must match a model of those dims.
Checkpoint load_checkpoint(const std::filesystem::path& file,
                           const ModelDims* expected = nullptr);

}  // namespace summ
