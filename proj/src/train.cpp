#include "summ/train.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "summ/error.hpp"

namespace summ {

static constexpr double kProbFloor = 1e-12;

TrainExample make_example(const Document& doc, const Vocab& vocab, const Ablations& ablations,
                          int max_src_tokens, int max_tgt_words) {
    if (!doc.has_summary)
        throw DataError("MissingField: document '" + doc.id + "' has no summary");
    SerializedDoc ser = truncate_doc(serialize_document(doc, ablations.no_syntax), max_src_tokens);
    TrainExample ex;
    ex.doc = encode_document(ser, vocab, doc.id);
    std::span<const std::string> words(doc.summary);
    if (max_tgt_words > 0 && int(words.size()) > max_tgt_words)
        words = words.first(std::size_t(max_tgt_words));
    ex.target = encode_summary(words, vocab, ex.doc.extended);
    return ex;
}

LossBuild sequence_loss(Tape& tape, const ParamVars& pv, const ModelDims& dims,
                        const EncodedDoc& doc, std::span<const int> target,
                        const Ablations& ablations, double coverage_weight,
                        bool want_diag) {
    if (target.empty())
        throw DataError("EmptyTarget: document '" + doc.id + "' has an empty target");
    const bool use_cov = !ablations.no_coverage && coverage_weight > 0.0;
    const int n_steps = int(target.size());

    DocContext dc = prepare_document(tape, pv, dims, doc, ablations);
    DecoderState st = decoder_start(tape, pv, dims, dc);

    LossBuild out;
    Var nll_sum, cov_sum;
    for (int j = 0; j < n_steps; ++j) {
        const int input = j == 0 ? Vocab::bos_id : feedback_id(target[j - 1], dims.vocab);
        StepResult step = decoder_step(tape, pv, dims, dc, st, input);

        Var p = tape.at_col(step.final_dist, target[j]);
        Var nll = tape.affine(tape.log_floored(p, kProbFloor), -1.0, 0.0);
        nll_sum = j == 0 ? nll : tape.add(nll_sum, nll);

        Var cov;
        if (use_cov) {
            cov = tape.sum_all(tape.minimum(step.attention, st.coverage));
            cov_sum = j == 0 ? cov : tape.add(cov_sum, cov);
        }

        out.nll_mean += tape.value(nll).scalar();
        if (use_cov) out.coverage_mean += tape.value(cov).scalar();
        if (want_diag) {
            StepDiag d;
            d.nll = tape.value(nll).scalar();
            if (use_cov) d.coverage = tape.value(cov).scalar();
            d.gen_prob = tape.value(step.gen_prob).scalar();
            d.gate_means = gate_row_means(tape.value(step.gate));
            const Tensor& att = tape.value(step.attention);
            d.attention.assign(att.flat().begin(), att.flat().end());
            out.steps.push_back(std::move(d));
        }
        st = step.state;
    }

    Var total = use_cov ? tape.add(nll_sum, tape.affine(cov_sum, coverage_weight, 0.0))
                        : nll_sum;
    out.loss = tape.affine(total, 1.0 / n_steps, 0.0);
    out.loss_value = tape.value(out.loss).scalar();
    out.nll_mean /= n_steps;
    out.coverage_mean /= n_steps;
    return out;
}

OptimizerState OptimizerState::init(const ModelParams& params, double acc_init) {
    OptimizerState opt;
    for (const auto& [name, t] : params.named_tensors()) {
        (void)name;
        opt.acc.push_back(Tensor::full(t->rows(), t->cols(), acc_init));
    }
    return opt;
}

double global_grad_norm(std::span<const Tensor> grads) {
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double x : g.flat()) sq += x * x;
    return std::sqrt(sq);
}

void adagrad_step(ModelParams& params, std::span<const Tensor> grads, OptimizerState& opt,
                  double learning_rate, double clip_norm) {
    auto named = params.named_tensors();
    if (grads.size() != named.size() || opt.acc.size() != named.size())
        throw ShapeError("ShapeMismatch: gradient/optimizer tensor count does not match model");
    for (std::size_t i = 0; i < named.size(); ++i)
        if (!grads[i].all_finite())
            throw NumericError("NonFiniteGradient in '" + named[i].first + "'");

    const double norm = global_grad_norm(grads);
    const double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;

    for (std::size_t i = 0; i < named.size(); ++i) {
        Tensor& theta = *named[i].second;
        Tensor& acc = opt.acc[i];
        const auto g = grads[i].flat();
        auto th = theta.flat();
        auto ac = acc.flat();
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double gi = g[k] * scale;
            ac[k] += gi * gi;
            th[k] -= learning_rate * gi / std::sqrt(ac[k]);
        }
    }
}

TrainResult train_loop(const TrainConfig& cfg, const std::vector<TrainExample>& examples,
                       std::ostream* log, const CheckpointSink& sink) {
    if (examples.empty()) throw DataError("EmptyCorpus: no training examples");
    if (cfg.steps <= 0) throw DataError("BadConfig: steps must be positive");
    if (cfg.dims.vocab <= 0) throw DataError("BadConfig: vocab size not set");

    Rng rng(cfg.seed);
    TrainResult result;
    result.params = ModelParams::init(cfg.dims, rng);
    result.opt = OptimizerState::init(result.params, cfg.accumulator_init);

    std::vector<std::size_t> order(examples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t cursor = order.size();  // forces a shuffle before the first step

    for (int step = 1; step <= cfg.steps; ++step) {
        if (cursor == order.size()) {
            rng.shuffle(order);
            cursor = 0;
        }
        const TrainExample& ex = examples[order[cursor++]];

        Tape tape;
        ParamVars pv = leaf_params(tape, result.params);
        LossBuild lb;
        try {
            lb = sequence_loss(tape, pv, cfg.dims, ex.doc, ex.target, cfg.ablations,
                               cfg.coverage_weight);
            if (!std::isfinite(lb.loss_value))
                throw NumericError("NonFiniteLoss");
            tape.backward(lb.loss);
            std::vector<Tensor> grads = collect_grads(tape, pv);
            adagrad_step(result.params, grads, result.opt, cfg.learning_rate, cfg.clip_norm);
        } catch (const NumericError& e) {
            throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) +
                               " on document '" + ex.doc.id + "'");
        }

        if (step == 1 || step == cfg.steps ||
            (cfg.log_every > 0 && step % cfg.log_every == 0)) {
            result.curve.push_back({step, lb.loss_value, lb.nll_mean, lb.coverage_mean});
            if (log)
                *log << "step " << step << " loss " << lb.loss_value << " nll " << lb.nll_mean
                     << " coverage " << lb.coverage_mean << '\n';
        }
        if (sink && cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0)
            sink(step, result.params, result.opt);
    }
    return result;
}

void write_curve(const std::filesystem::path& file, std::span<const CurvePoint> curve) {
    std::ofstream out(file);
    if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
    out << "step\tloss\tnll\tcoverage\n";
    out.precision(17);
    for (const CurvePoint& p : curve)
        out << p.step << '\t' << p.loss << '\t' << p.nll << '\t' << p.coverage << '\n';
    if (!out) throw IoError("failed writing curve to '" + file.string() + "'");
}

double corpus_nll_per_token(const ModelParams& params, const std::vector<TrainExample>& examples,
                            const Ablations& ablations) {
    if (examples.empty()) throw DataError("EmptyCorpus: no examples to evaluate");
    double nll = 0.0;
    std::size_t tokens = 0;
    for (const TrainExample& ex : examples) {
        Tape tape;
        ParamVars pv = leaf_params(tape, params);
        LossBuild lb = sequence_loss(tape, pv, params.dims, ex.doc, ex.target, ablations,
                                     /*coverage_weight=*/0.0);
        nll += lb.nll_mean * double(ex.target.size());
        tokens += ex.target.size();
    }
    return nll / double(tokens);
}

GradCheckReport model_grad_check(const ModelDims& dims, const Ablations& ablations,
                                 const EncodedDoc& doc, std::span<const int> target,
                                 double coverage_weight, double eps, double tol,
                                 std::uint64_t seed) {
    Rng rng(seed);
    ModelParams params = ModelParams::init(dims, rng);

    auto eval = [&]() {
        Tape tape;
        ParamVars pv = leaf_params(tape, params);
        return sequence_loss(tape, pv, dims, doc, target, ablations, coverage_weight)
            .loss_value;
    };
    auto analytic = [&]() {
        Tape tape;
        ParamVars pv = leaf_params(tape, params);
        LossBuild lb = sequence_loss(tape, pv, dims, doc, target, ablations, coverage_weight);
        tape.backward(lb.loss);
        return collect_grads(tape, pv);
    };
    return grad_check(eval, analytic, params.named_tensors(), eps, tol);
}

}  // namespace summ
