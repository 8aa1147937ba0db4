#include "summ/decode.hpp"

#include <cmath>

#include "summ/error.hpp"
#include "summ/train.hpp"

namespace summ {

namespace {

// One document pinned to a tape; each step leafs the previous decoder state,
// runs a step graph, extracts plain tensors and truncates the tape back.
class ModelStepper {
public:
    struct State {
        Tensor s, cell, context, gated, coverage;
    };

    ModelStepper(const ModelParams& params, const EncodedDoc& doc, const Ablations& ablations)
        : dims_(params.dims) {
        pv_ = leaf_params(tape_, params);
        dc_ = prepare_document(tape_, pv_, dims_, doc, ablations);
        DecoderState st = decoder_start(tape_, pv_, dims_, dc_);
        init_ = freeze(st);
        mark_ = tape_.mark();
    }

    const State& initial() const { return init_; }
    int ext_size() const { return dc_.ext_size; }

    std::pair<std::vector<double>, State> step(const State& prev, int input_ext_id) {
        tape_.truncate(mark_);
        DecoderState ps;
        ps.s = tape_.leaf(prev.s);
        ps.cell = tape_.leaf(prev.cell);
        ps.context = tape_.leaf(prev.context);
        ps.gated = tape_.leaf(prev.gated);
        ps.coverage = tape_.leaf(prev.coverage);
        StepResult r = decoder_step(tape_, pv_, dims_, dc_, ps,
                                    feedback_id(input_ext_id, dims_.vocab));
        const Tensor& dist = tape_.value(r.final_dist);
        std::vector<double> logp(std::size_t(dist.cols()));
        for (int c = 0; c < dist.cols(); ++c) logp[std::size_t(c)] = std::log(dist(0, c));
        State next = freeze(r.state);
        return {std::move(logp), std::move(next)};
    }

private:
    State freeze(const DecoderState& st) const {
        return State{tape_.value(st.s), tape_.value(st.cell), tape_.value(st.context),
                     tape_.value(st.gated), tape_.value(st.coverage)};
    }

    Tape tape_;
    ParamVars pv_;
    DocContext dc_;
    ModelDims dims_;
    State init_;
    std::size_t mark_ = 0;
};

std::vector<char> banned_ids(const EncodedDoc& doc, const Vocab& vocab) {
    std::vector<char> banned(std::size_t(doc.extended.size()), 0);
    banned[Vocab::pad_id] = 1;
    banned[Vocab::bos_id] = 1;
    for (int id = 0; id < vocab.size(); ++id)
        if (vocab.is_symbol(id)) banned[std::size_t(id)] = 1;
    return banned;
}

DecodeResult to_result(const Hypothesis& hyp, const EncodedDoc& doc, const Vocab& vocab) {
    DecodeResult r;
    r.ext_ids = hyp.ids;
    r.score = hyp.score;
    r.finished = hyp.finished;
    for (int id : hyp.ids) r.words.push_back(doc.extended.text(vocab, id));
    return r;
}

}  // namespace

DecodeResult beam_decode(const ModelParams& params, const EncodedDoc& doc,
                         const Ablations& ablations, const BeamConfig& cfg,
                         const Vocab& vocab) {
    if (cfg.width <= 0) throw DataError("BadConfig: beam width must be positive");
    if (vocab.size() != params.dims.vocab)
        throw ShapeError("ShapeMismatch: vocab has " + std::to_string(vocab.size()) +
                         " entries but model expects " + std::to_string(params.dims.vocab));
    ModelStepper stepper(params, doc, ablations);
    auto step = [&stepper](const ModelStepper::State& s, int input) {
        return stepper.step(s, input);
    };
    Hypothesis hyp = beam_search_core(stepper.initial(), step, cfg, Vocab::bos_id,
                                      Vocab::eos_id, banned_ids(doc, vocab));
    return to_result(hyp, doc, vocab);
}

DecodeResult greedy_decode(const ModelParams& params, const EncodedDoc& doc,
                           const Ablations& ablations, int max_len, const Vocab& vocab) {
    if (vocab.size() != params.dims.vocab)
        throw ShapeError("ShapeMismatch: vocab has " + std::to_string(vocab.size()) +
                         " entries but model expects " + std::to_string(params.dims.vocab));
    ModelStepper stepper(params, doc, ablations);
    const std::vector<char> banned = banned_ids(doc, vocab);

    Hypothesis hyp;
    ModelStepper::State state = stepper.initial();
    int input = Vocab::bos_id;
    for (int depth = 0; depth < max_len; ++depth) {
        auto [logp, next] = stepper.step(state, input);
        int pick = -1;
        for (std::size_t v = 0; v < logp.size(); ++v) {
            if (v < banned.size() && banned[v]) continue;
            if (pick < 0 || logp[v] > logp[std::size_t(pick)]) pick = int(v);
        }
        if (pick < 0) break;
        hyp.score += logp[std::size_t(pick)];
        if (pick == Vocab::eos_id) {
            hyp.finished = true;
            break;
        }
        hyp.ids.push_back(pick);
        state = std::move(next);
        input = pick;
    }
    return to_result(hyp, doc, vocab);
}

GateTrace trace_gates(const ModelParams& params, const EncodedDoc& doc,
                      std::span<const int> forced, const Ablations& ablations) {
    Tape tape;
    ParamVars pv = leaf_params(tape, params);
    LossBuild lb = sequence_loss(tape, pv, params.dims, doc, forced, ablations,
                                 /*coverage_weight=*/0.0, /*want_diag=*/true);
    GateTrace trace;
    const std::size_t n_words = lb.steps.front().gate_means.size();
    if (ablations.static_gate)
        trace.rows.push_back(lb.steps.front().gate_means);
    else
        trace.rows.push_back(std::vector<double>(n_words, 1.0));
    for (const StepDiag& d : lb.steps) trace.rows.push_back(d.gate_means);
    return trace;
}

double trace_step_variability(const GateTrace& trace) {
    if (trace.rows.size() < 2) return 0.0;
    const std::size_t n_rows = trace.rows.size() - 1;  // decode rows only
    const std::size_t n_pos = trace.rows[1].size();
    if (n_pos == 0) return 0.0;
    bool constant = true;
    for (std::size_t r = 2; r < trace.rows.size() && constant; ++r)
        constant = trace.rows[r] == trace.rows[1];
    if (constant) return 0.0;  // identical rows give exact zero, no fp residue
    double total = 0.0;
    for (std::size_t p = 0; p < n_pos; ++p) {
        double mean = 0.0;
        for (std::size_t r = 1; r < trace.rows.size(); ++r) mean += trace.rows[r][p];
        mean /= double(n_rows);
        double var = 0.0;
        for (std::size_t r = 1; r < trace.rows.size(); ++r) {
            const double d = trace.rows[r][p] - mean;
            var += d * d;
        }
        total += std::sqrt(var / double(n_rows));
    }
    return total / double(n_pos);
}

}  // namespace summ
