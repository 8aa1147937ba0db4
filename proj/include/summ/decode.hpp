#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "summ/model.hpp"
#include "summ/syntax.hpp"

namespace summ {

struct BeamConfig {
    int width = 4;
    int max_len = 120;  // decode steps; a hypothesis hitting it stays unfinished
};

struct Hypothesis {
    std::vector<int> ids;  // emitted tokens (extended ids), eos not included
    double score = 0.0;    // summed log-probability, including eos when finished
    bool finished = false;
};

// Beam search over any stepper. `step(state, input_id)` returns the
// log-probability row over the candidate vocabulary and the successor state;
// `input_id` is `start_id` for the first step, then the previously emitted id.
// Each step keeps the top-`width` continuations by summed log-probability (no
// length normalization); ones ending in `eos_id` retire as finished. Search
// stops once `width` hypotheses have finished or `max_len` steps have run.
// Ties break deterministically: score, then older hypothesis, then lower id.
template <class State, class StepFn>
Hypothesis beam_search_core(const State& init, StepFn&& step, const BeamConfig& cfg,
                            int start_id, int eos_id, const std::vector<char>& banned) {
    struct Live {
        State state;
        std::vector<int> ids;
        double score = 0.0;
    };
    struct Cand {
        double score;
        int hyp;
        int token;
    };

    std::vector<Live> live;
    live.push_back(Live{init, {}, 0.0});
    std::vector<Hypothesis> done;

    for (int depth = 0; depth < cfg.max_len && !live.empty(); ++depth) {
        std::vector<State> next_states;
        next_states.reserve(live.size());
        std::vector<Cand> cands;
        for (std::size_t h = 0; h < live.size(); ++h) {
            const int input = live[h].ids.empty() ? start_id : live[h].ids.back();
            auto [logp, next] = step(live[h].state, input);
            next_states.push_back(std::move(next));
            for (std::size_t v = 0; v < logp.size(); ++v) {
                if (v < banned.size() && banned[v]) continue;
                cands.push_back(Cand{live[h].score + logp[v], int(h), int(v)});
            }
        }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.score != b.score) return a.score > b.score;
            if (a.hyp != b.hyp) return a.hyp < b.hyp;
            return a.token < b.token;
        });

        std::vector<Live> next_live;
        int taken = 0;
        for (const Cand& c : cands) {
            if (taken == cfg.width) break;
            ++taken;
            if (c.token == eos_id) {
                done.push_back(Hypothesis{live[std::size_t(c.hyp)].ids, c.score, true});
            } else {
                Live nl;
                nl.state = next_states[std::size_t(c.hyp)];
                nl.ids = live[std::size_t(c.hyp)].ids;
                nl.ids.push_back(c.token);
                nl.score = c.score;
                next_live.push_back(std::move(nl));
            }
        }
        live = std::move(next_live);
        if (int(done.size()) >= cfg.width) break;
    }

    if (!done.empty()) {
        const Hypothesis* best = &done.front();
        for (const Hypothesis& h : done)
            if (h.score > best->score) best = &h;
        return *best;
    }
    if (live.empty()) return Hypothesis{};  // max_len == 0
    const Live* best = &live.front();
    for (const Live& l : live)
        if (l.score > best->score) best = &l;
    return Hypothesis{best->ids, best->score, false};
}

struct DecodeResult {
    std::vector<int> ext_ids;
    std::vector<std::string> words;
    double score = 0.0;
    bool finished = false;
};

// Beam decode of one document. PAD, BOS and parsing-symbol ids are never
// emitted; document OOVs are reachable through their extended ids.
DecodeResult beam_decode(const ModelParams& params, const EncodedDoc& doc,
                         const Ablations& ablations, const BeamConfig& cfg,
                         const Vocab& vocab);

// Argmax decoding; must match beam width 1 exactly.
DecodeResult greedy_decode(const ModelParams& params, const EncodedDoc& doc,
                           const Ablations& ablations, int max_len, const Vocab& vocab);

// Per-step gate activity under teacher forcing. Row 0 is the initial gate
// (all ones, or the document gate in static mode), then one row per forced
// token; each row holds the per-word-position gate means.
struct GateTrace {
    std::vector<std::vector<double>> rows;
};

GateTrace trace_gates(const ModelParams& params, const EncodedDoc& doc,
                      std::span<const int> forced, const Ablations& ablations);

// Mean over word positions of the stddev across decode rows (row 0 excluded);
// 0 exactly when every decode row is identical.
double trace_step_variability(const GateTrace& trace);

}  // namespace summ
