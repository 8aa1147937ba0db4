#include "summ/model.hpp"

#include <cstddef>

#include "summ/error.hpp"

namespace summ {

static void shape_lstm(LstmParams& l, int in, int hidden) {
    for (Tensor* t : {&l.in_i, &l.in_f, &l.in_c, &l.in_o}) *t = Tensor(in, hidden);
    for (Tensor* t : {&l.rec_i, &l.rec_f, &l.rec_c, &l.rec_o}) *t = Tensor(hidden, hidden);
    for (Tensor* t : {&l.b_i, &l.b_f, &l.b_c, &l.b_o}) *t = Tensor(1, hidden);
}

ModelParams ModelParams::with_shapes(const ModelDims& dims) {
    if (dims.vocab <= 0) throw ShapeError("BadDims: vocab size must be positive");
    if (dims.embed <= 0 || dims.hidden <= 0)
        throw ShapeError("BadDims: embed and hidden sizes must be positive");
    const int e = dims.embed, h = dims.hidden, v = dims.vocab;
    const int p = dims.resolved_out_hidden();

    ModelParams m;
    m.dims = dims;
    m.embedding = Tensor(v, e);
    shape_lstm(m.enc_fw, e, h);
    shape_lstm(m.enc_bw, e, h);
    shape_lstm(m.dec, e + 2 * h, h);
    m.dec_init_w = Tensor(2 * h, h);
    m.dec_init_b = Tensor(1, h);
    m.gate_doc_w = Tensor(2 * h, 2 * h);
    m.gate_dec_w = Tensor(h, 2 * h);
    m.gate_enc_w = Tensor(2 * h, 2 * h);
    m.gate_b = Tensor(1, 2 * h);
    m.attn_enc_w = Tensor(2 * h, 1);
    m.attn_syn_w = Tensor(2 * h, 1);
    m.attn_dec_w = Tensor(h, 1);
    m.attn_b = Tensor(1, 1);
    m.out_hidden_w = Tensor(3 * h, p);
    m.out_hidden_b = Tensor(1, p);
    m.out_vocab_w = Tensor(p, v);
    m.out_vocab_b = Tensor(1, v);
    m.ptr_ctx_w = Tensor(2 * h, 1);
    m.ptr_dec_w = Tensor(h, 1);
    m.ptr_in_w = Tensor(e, 1);
    m.ptr_b = Tensor(1, 1);
    return m;
}

ModelParams ModelParams::init(const ModelDims& dims, Rng& rng) {
    ModelParams m = with_shapes(dims);
    for_each_param(m, [&rng](const std::string&, Tensor& t) {
        for (double& x : t.flat()) x = rng.uniform(-0.1, 0.1);
    });
    return m;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    for_each_param(*this, [&out](const std::string& name, Tensor& t) {
        out.emplace_back(name, &t);
    });
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named_tensors() const {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for_each_param(*this, [&out](const std::string& name, const Tensor& t) {
        out.emplace_back(name, &t);
    });
    return out;
}

std::size_t ModelParams::coordinate_count() const {
    std::size_t n = 0;
    for_each_param(*this, [&n](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
}

std::vector<Var*> ParamVars::ordered() {
    std::vector<Var*> out;
    for_each_param(*this, [&out](const std::string&, Var& v) { out.push_back(&v); });
    return out;
}

ParamVars leaf_params(Tape& tape, const ModelParams& params) {
    std::vector<const Tensor*> tensors;
    for_each_param(params, [&tensors](const std::string&, const Tensor& t) {
        tensors.push_back(&t);
    });
    ParamVars vars;
    std::vector<Var*> slots = vars.ordered();
    for (std::size_t i = 0; i < slots.size(); ++i) *slots[i] = tape.leaf(*tensors[i]);
    return vars;
}

std::vector<Tensor> collect_grads(const Tape& tape, ParamVars& vars) {
    std::vector<Tensor> grads;
    for (Var* v : vars.ordered()) grads.push_back(tape.grad(*v));
    return grads;
}

std::pair<Var, Var> lstm_cell(Tape& t, const LstmVars& w, Var x, Var h_prev, Var c_prev) {
    Var gi = t.sigmoid(t.add(t.add(t.matmul(x, w.in_i), t.matmul(h_prev, w.rec_i)), w.b_i));
    Var gf = t.sigmoid(t.add(t.add(t.matmul(x, w.in_f), t.matmul(h_prev, w.rec_f)), w.b_f));
    Var gc = t.tanh(t.add(t.add(t.matmul(x, w.in_c), t.matmul(h_prev, w.rec_c)), w.b_c));
    Var go = t.sigmoid(t.add(t.add(t.matmul(x, w.in_o), t.matmul(h_prev, w.rec_o)), w.b_o));
    Var c = t.add(t.mul(gf, c_prev), t.mul(gi, gc));
    Var h = t.mul(go, t.tanh(c));
    return {h, c};
}

std::vector<Var> lstm_run(Tape& t, const LstmVars& w, Var inputs, bool reverse) {
    const int n = t.value(inputs).rows();
    const int hidden = t.value(w.b_i).cols();

    // Input projections for all positions at once; only the recurrent part is stepwise.
    Var pi = t.add(t.matmul(inputs, w.in_i), w.b_i);
    Var pf = t.add(t.matmul(inputs, w.in_f), w.b_f);
    Var pc = t.add(t.matmul(inputs, w.in_c), w.b_c);
    Var po = t.add(t.matmul(inputs, w.in_o), w.b_o);

    Var h = t.leaf(Tensor(1, hidden));
    Var c = t.leaf(Tensor(1, hidden));
    std::vector<Var> states(static_cast<std::size_t>(n));
    for (int step = 0; step < n; ++step) {
        const int pos = reverse ? n - 1 - step : step;
        Var gi = t.sigmoid(t.add(t.take_rows(pi, {pos}), t.matmul(h, w.rec_i)));
        Var gf = t.sigmoid(t.add(t.take_rows(pf, {pos}), t.matmul(h, w.rec_f)));
        Var gc = t.tanh(t.add(t.take_rows(pc, {pos}), t.matmul(h, w.rec_c)));
        Var go = t.sigmoid(t.add(t.take_rows(po, {pos}), t.matmul(h, w.rec_o)));
        c = t.add(t.mul(gf, c), t.mul(gi, gc));
        h = t.mul(go, t.tanh(c));
        states[static_cast<std::size_t>(pos)] = h;
    }
    return states;
}

EncoderGraph encode(Tape& t, const ParamVars& pv, const ModelDims& dims,
                    const EncodedDoc& doc) {
    const int m = static_cast<int>(doc.base_ids.size());
    if (m == 0) throw DataError("EmptyInput: cannot encode an empty document");

    Var inputs = t.take_rows(pv.embedding, doc.base_ids);
    std::vector<Var> fw = lstm_run(t, pv.enc_fw, inputs, false);
    std::vector<Var> bw = lstm_run(t, pv.enc_bw, inputs, true);

    std::vector<Var> rows(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i)
        rows[static_cast<std::size_t>(i)] =
            t.concat_cols(fw[static_cast<std::size_t>(i)], bw[static_cast<std::size_t>(i)]);

    EncoderGraph g;
    g.states_all = t.stack_rows(rows);
    if (!doc.word_positions.empty())
        g.states_words = t.take_rows(g.states_all, doc.word_positions);
    g.doc_vec = t.concat_cols(fw.back(), bw.front());
    if (!doc.symbol_positions.empty())
        g.syn_vec = t.max_pool_rows(t.take_rows(g.states_all, doc.symbol_positions));
    else
        g.syn_vec = t.leaf(Tensor(1, 2 * dims.hidden));
    return g;
}

DocContext prepare_document(Tape& t, const ParamVars& pv, const ModelDims& dims,
                            const EncodedDoc& doc, const Ablations& ablations) {
    if (doc.extended.base_size != dims.vocab)
        throw ShapeError("ShapeMismatch: document '" + doc.id + "' encoded against a vocab of " +
                         std::to_string(doc.extended.base_size) + " entries but the model has " +
                         std::to_string(dims.vocab));
    DocContext dc;
    dc.enc = encode(t, pv, dims, doc);
    dc.n_words = static_cast<int>(doc.word_positions.size());
    if (dc.n_words == 0)
        throw DataError("AllMasked: document '" + doc.id + "' has no word positions");
    dc.word_ext_ids = doc.word_ext_ids();
    dc.ext_size = doc.extended.size();
    dc.ablations = ablations;

    dc.init_state = t.tanh(t.add(t.matmul(dc.enc.doc_vec, pv.dec_init_w), pv.dec_init_b));
    dc.ones_gate = t.leaf(Tensor::full(dc.n_words, 2 * dims.hidden, 1.0));
    if (ablations.static_gate) {
        Var g_row = t.sigmoid(t.add(t.matmul(dc.enc.doc_vec, pv.gate_doc_w), pv.gate_b));
        dc.static_gate = t.mul(dc.ones_gate, g_row);  // broadcast to one row per word
        dc.static_gated = t.mul(dc.static_gate, dc.enc.states_words);
    }
    return dc;
}

DecoderState decoder_start(Tape& t, const ParamVars&, const ModelDims& dims,
                           const DocContext& dc) {
    DecoderState st;
    st.s = dc.init_state;
    st.cell = t.leaf(Tensor(1, dims.hidden));
    st.context = t.leaf(Tensor(1, 2 * dims.hidden));
    // The initial gate is all ones, so the initial gated states are the raw
    // encoder states; in static mode the fixed gate applies from the start.
    st.gated = dc.ablations.static_gate ? dc.static_gated : dc.enc.states_words;
    st.coverage = t.leaf(Tensor(1, dc.n_words));
    return st;
}

StepResult decoder_step(Tape& t, const ParamVars& pv, const ModelDims& dims,
                        const DocContext& dc, const DecoderState& prev, int input_id) {
    if (input_id < 0 || input_id >= dims.vocab)
        throw ShapeError("IndexOutOfRange: decoder input id " + std::to_string(input_id) +
                         " outside vocab of " + std::to_string(dims.vocab));

    Var y_emb = t.take_rows(pv.embedding, {input_id});
    Var x = t.concat_cols(y_emb, prev.context);
    auto [s, cell] = lstm_cell(t, pv.dec, x, prev.s, prev.cell);

    // Gate update conditioned on the document vector, the fresh decoder state
    // and the previously gated states; applied to the raw encoder states.
    Var gate, gated;
    if (dc.ablations.no_gate) {
        gate = dc.ones_gate;
        gated = dc.enc.states_words;
    } else if (dc.ablations.static_gate) {
        gate = dc.static_gate;
        gated = dc.static_gated;
    } else {
        Var bias = t.add(t.add(t.matmul(dc.enc.doc_vec, pv.gate_doc_w),
                               t.matmul(s, pv.gate_dec_w)),
                         pv.gate_b);
        gate = t.sigmoid(t.add(t.matmul(prev.gated, pv.gate_enc_w), bias));
        gated = t.mul(gate, dc.enc.states_words);
    }

    // Scalar attention energies over word positions.
    Var score_bias = t.add(t.add(t.matmul(dc.enc.syn_vec, pv.attn_syn_w),
                                 t.matmul(s, pv.attn_dec_w)),
                           pv.attn_b);
    Var energies = t.tanh(t.add(t.matmul(gated, pv.attn_enc_w), score_bias));
    Var attention = t.softmax_rows(t.transpose(energies));
    Var context = t.matmul(attention, gated);

    // Vocab distribution from [context, state] through one hidden layer.
    Var hid = t.add(t.matmul(t.concat_cols(context, s), pv.out_hidden_w), pv.out_hidden_b);
    Var vocab_dist = t.softmax_rows(t.add(t.matmul(hid, pv.out_vocab_w), pv.out_vocab_b));

    Var gen_prob = t.sigmoid(t.add(t.add(t.add(t.matmul(context, pv.ptr_ctx_w),
                                               t.matmul(s, pv.ptr_dec_w)),
                                         t.matmul(y_emb, pv.ptr_in_w)),
                                   pv.ptr_b));

    const int extra = dc.ext_size - dims.vocab;
    Var vocab_ext = extra > 0 ? t.pad_cols(vocab_dist, extra) : vocab_dist;
    Var copy_dist = t.scatter_add_cols(attention, dc.word_ext_ids, dc.ext_size);
    Var final_dist = t.add(t.scale_by(gen_prob, vocab_ext),
                           t.scale_by(t.affine(gen_prob, -1.0, 1.0), copy_dist));

    StepResult r;
    r.state.s = s;
    r.state.cell = cell;
    r.state.context = context;
    r.state.gated = gated;
    r.state.coverage = t.add(prev.coverage, attention);
    r.gate = gate;
    r.attention = attention;
    r.gen_prob = gen_prob;
    r.final_dist = final_dist;
    return r;
}

std::vector<double> gate_row_means(const Tensor& gate) {
    std::vector<double> means(static_cast<std::size_t>(gate.rows()));
    for (int r = 0; r < gate.rows(); ++r) {
        double sum = 0.0;
        for (int c = 0; c < gate.cols(); ++c) sum += gate(r, c);
        means[static_cast<std::size_t>(r)] = sum / gate.cols();
    }
    return means;
}

int feedback_id(int ext_id, int vocab_size) {
    return ext_id < vocab_size ? ext_id : Vocab::unk_id;
}

}  // namespace summ
