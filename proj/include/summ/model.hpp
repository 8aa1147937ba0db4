#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "summ/syntax.hpp"
#include "summ/tape.hpp"

namespace summ {

struct Ablations {
    bool no_syntax = false;    // plain word stream; zero syntactic vector
    bool static_gate = false;  // per-document gate from the document vector only
    bool no_gate = false;      // gates pinned to 1
    bool no_coverage = false;  // drop the coverage loss term
};

struct ModelDims {
    int embed = 128;
    int hidden = 256;
    int vocab = 0;
    int out_hidden = 0;  // hidden layer of the vocab projection; 0 means `hidden`

    int resolved_out_hidden() const { return out_hidden > 0 ? out_hidden : hidden; }
    bool operator==(const ModelDims&) const = default;
};

// One LSTM direction: input, forget, cell, output blocks.
// in_* are [in x H], rec_* are [H x H], b_* are [1 x H].
struct LstmParams {
    Tensor in_i, rec_i, b_i;
    Tensor in_f, rec_f, b_f;
    Tensor in_c, rec_c, b_c;
    Tensor in_o, rec_o, b_o;
};

struct LstmVars {
    Var in_i, rec_i, b_i;
    Var in_f, rec_f, b_f;
    Var in_c, rec_c, b_c;
    Var in_o, rec_o, b_o;
};

// Every trainable tensor. Encoder states have width 2H, decoder states H.
struct ModelParams {
    ModelDims dims;

    Tensor embedding;  // [V x E], shared by words and parsing symbols

    LstmParams enc_fw;  // input E
    LstmParams enc_bw;  // input E
    LstmParams dec;     // input E + 2H

    Tensor dec_init_w, dec_init_b;  // [2H x H], [1 x H]

    // selective gate: conditions on document vector, decoder state, previous gated states
    Tensor gate_doc_w, gate_dec_w, gate_enc_w, gate_b;  // [2H x 2H], [H x 2H], [2H x 2H], [1 x 2H]

    // attention scoring: gated state, syntactic vector, decoder state -> scalar
    Tensor attn_enc_w, attn_syn_w, attn_dec_w, attn_b;  // [2H x 1], [2H x 1], [H x 1], [1 x 1]

    // two-layer vocab projection over [context, state]
    Tensor out_hidden_w, out_hidden_b;  // [3H x P], [1 x P]
    Tensor out_vocab_w, out_vocab_b;    // [P x V], [1 x V]

    // generate-vs-copy switch
    Tensor ptr_ctx_w, ptr_dec_w, ptr_in_w, ptr_b;  // [2H x 1], [H x 1], [E x 1], [1 x 1]

    // Uniform [-0.1, 0.1] initialization in a fixed tensor order.
    static ModelParams init(const ModelDims& dims, Rng& rng);
    static ModelParams with_shapes(const ModelDims& dims);  // all zeros

    std::vector<std::pair<std::string, Tensor*>> named_tensors();
    std::vector<std::pair<std::string, const Tensor*>> named_tensors() const;
    std::size_t coordinate_count() const;
};

struct ParamVars {
    Var embedding;
    LstmVars enc_fw, enc_bw, dec;
    Var dec_init_w, dec_init_b;
    Var gate_doc_w, gate_dec_w, gate_enc_w, gate_b;
    Var attn_enc_w, attn_syn_w, attn_dec_w, attn_b;
    Var out_hidden_w, out_hidden_b, out_vocab_w, out_vocab_b;
    Var ptr_ctx_w, ptr_dec_w, ptr_in_w, ptr_b;

    std::vector<Var*> ordered();
};

// Fixed traversal order shared by checkpoints, optimizer state and gradient
// collection. P is ModelParams or ParamVars.
template <class P, class F>
void for_each_param(P& p, F&& f) {
    auto lstm = [&f](const std::string& prefix, auto& l) {
        f(prefix + "/in_i", l.in_i);
        f(prefix + "/rec_i", l.rec_i);
        f(prefix + "/b_i", l.b_i);
        f(prefix + "/in_f", l.in_f);
        f(prefix + "/rec_f", l.rec_f);
        f(prefix + "/b_f", l.b_f);
        f(prefix + "/in_c", l.in_c);
        f(prefix + "/rec_c", l.rec_c);
        f(prefix + "/b_c", l.b_c);
        f(prefix + "/in_o", l.in_o);
        f(prefix + "/rec_o", l.rec_o);
        f(prefix + "/b_o", l.b_o);
    };
    f("embedding", p.embedding);
    lstm("enc_fw", p.enc_fw);
    lstm("enc_bw", p.enc_bw);
    lstm("dec", p.dec);
    f("dec_init_w", p.dec_init_w);
    f("dec_init_b", p.dec_init_b);
    f("gate_doc_w", p.gate_doc_w);
    f("gate_dec_w", p.gate_dec_w);
    f("gate_enc_w", p.gate_enc_w);
    f("gate_b", p.gate_b);
    f("attn_enc_w", p.attn_enc_w);
    f("attn_syn_w", p.attn_syn_w);
    f("attn_dec_w", p.attn_dec_w);
    f("attn_b", p.attn_b);
    f("out_hidden_w", p.out_hidden_w);
    f("out_hidden_b", p.out_hidden_b);
    f("out_vocab_w", p.out_vocab_w);
    f("out_vocab_b", p.out_vocab_b);
    f("ptr_ctx_w", p.ptr_ctx_w);
    f("ptr_dec_w", p.ptr_dec_w);
    f("ptr_in_w", p.ptr_in_w);
    f("ptr_b", p.ptr_b);
}

// Leaf every parameter tensor onto the tape.
ParamVars leaf_params(Tape& tape, const ModelParams& params);

// Tape gradients in the for_each_param order; call after Tape::backward.
std::vector<Tensor> collect_grads(const Tape& tape, ParamVars& vars);

// Single LSTM cell step; returns (hidden, cell).
std::pair<Var, Var> lstm_cell(Tape& t, const LstmVars& w, Var x, Var h_prev, Var c_prev);

// Runs an LSTM over the rows of `inputs` [T x in]; returns the hidden state at
// every position, aligned with input positions (also when reversed).
std::vector<Var> lstm_run(Tape& t, const LstmVars& w, Var inputs, bool reverse);

// BiLSTM pass over the document token stream.
struct EncoderGraph {
    Var states_all;    // [m x 2H], forward and backward states at each position
    Var states_words;  // [nw x 2H], word-position rows (invalid if no words)
    Var doc_vec;       // [1 x 2H]: forward last state, backward first state
    Var syn_vec;       // [1 x 2H]: max-pool over symbol-position states, else zeros
};

EncoderGraph encode(Tape& t, const ParamVars& pv, const ModelDims& dims,
                    const EncodedDoc& doc);

// Everything that is fixed for one document while decoding.
struct DocContext {
    EncoderGraph enc;
    Var init_state;         // tanh of projected document vector
    Var ones_gate;          // [nw x 2H] ones (reported when gating is off/initial)
    Var static_gate;        // [nw x 2H] (static mode only)
    Var static_gated;       // [nw x 2H] (static mode only)
    std::vector<int> word_ext_ids;
    int n_words = 0;
    int ext_size = 0;
    Ablations ablations;
};

DocContext prepare_document(Tape& t, const ParamVars& pv, const ModelDims& dims,
                            const EncodedDoc& doc, const Ablations& ablations);

struct DecoderState {
    Var s;         // [1 x H]
    Var cell;      // [1 x H] LSTM cell
    Var context;   // [1 x 2H]
    Var gated;     // [nw x 2H] gated encoder states fed to the next gate update
    Var coverage;  // [1 x nw] running attention sum
};

DecoderState decoder_start(Tape& t, const ParamVars& pv, const ModelDims& dims,
                           const DocContext& dc);

struct StepResult {
    DecoderState state;
    Var gate;        // [nw x 2H]
    Var attention;   // [1 x nw], sums to 1 over word positions
    Var gen_prob;    // [1 x 1]
    Var final_dist;  // [1 x (V + oov)]
};

// One decode step: new decoder state from (input embedding, previous context),
// gate update, attention over gated word states, vocab/pointer mixture.
// `input_id` is the decoder input token (base vocab id).
StepResult decoder_step(Tape& t, const ParamVars& pv, const ModelDims& dims,
                        const DocContext& dc, const DecoderState& prev, int input_id);

// Mean over the 2H gate coordinates of each row: one value per word position.
std::vector<double> gate_row_means(const Tensor& gate);

// Maps an extended id to a feedable base id (OOV words feed back as unk).
int feedback_id(int ext_id, int vocab_size);

}  // namespace summ
