#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "summ/corpus.hpp"
#include "summ/model.hpp"

namespace summ {

struct TrainConfig {
    ModelDims dims;
    Ablations ablations;
    int steps = 1000;
    double learning_rate = 0.15;
    double accumulator_init = 0.1;
    double clip_norm = 2.0;       // global gradient norm; <= 0 disables
    double coverage_weight = 1.0;
    int max_src_tokens = 1200;
    int max_tgt_words = 100;
    std::uint64_t seed = 0;
    int log_every = 20;
    int checkpoint_every = 0;  // 0: no periodic checkpoints
};

// A document made model-ready: truncated, encoded, target ends with eos.
struct TrainExample {
    EncodedDoc doc;
    std::vector<int> target;  // extended-aware ids
};

TrainExample make_example(const Document& doc, const Vocab& vocab, const Ablations& ablations,
                          int max_src_tokens, int max_tgt_words);

struct StepDiag {
    double nll = 0.0;
    double coverage = 0.0;
    double gen_prob = 0.0;
    std::vector<double> gate_means;  // per source word position
    std::vector<double> attention;
};

struct LossBuild {
    Var loss;  // scalar: mean over steps of nll + weight * coverage penalty
    double loss_value = 0.0;
    double nll_mean = 0.0;
    double coverage_mean = 0.0;
    std::vector<StepDiag> steps;  // filled when want_diag
};

// Teacher-forced loss graph over the whole target sequence. Gold tokens feed
// back through the decoder input (document OOVs feed back as unk).
LossBuild sequence_loss(Tape& tape, const ParamVars& pv, const ModelDims& dims,
                        const EncodedDoc& doc, std::span<const int> target,
                        const Ablations& ablations, double coverage_weight,
                        bool want_diag = false);

struct OptimizerState {
    std::vector<Tensor> acc;  // squared-gradient accumulators, for_each_param order

    static OptimizerState init(const ModelParams& params, double acc_init);
};

double global_grad_norm(std::span<const Tensor> grads);

// Clips the global norm, then applies the adaptive update
// theta -= lr * g / sqrt(acc) with acc += g^2 (no epsilon: acc starts > 0).
void adagrad_step(ModelParams& params, std::span<const Tensor> grads, OptimizerState& opt,
                  double learning_rate, double clip_norm);

struct CurvePoint {
    int step = 0;
    double loss = 0.0, nll = 0.0, coverage = 0.0;
};

using CheckpointSink =
    std::function<void(int step, const ModelParams&, const OptimizerState&)>;

struct TrainResult {
    ModelParams params;
    OptimizerState opt;
    std::vector<CurvePoint> curve;
};

// One document per step, reshuffled each epoch; fully deterministic for a
// given config + corpus. Numeric failures name the step and document.
TrainResult train_loop(const TrainConfig& cfg, const std::vector<TrainExample>& examples,
                       std::ostream* log = nullptr, const CheckpointSink& sink = {});

void write_curve(const std::filesystem::path& file, std::span<const CurvePoint> curve);

// Teacher-forced negative log-likelihood per target token over a corpus.
double corpus_nll_per_token(const ModelParams& params, const std::vector<TrainExample>& examples,
                            const Ablations& ablations);

// Central-difference check of the full loss gradient on one example, with
// freshly initialized parameters of the given dims.
GradCheckReport model_grad_check(const ModelDims& dims, const Ablations& ablations,
                                 const EncodedDoc& doc, std::span<const int> target,
                                 double coverage_weight, double eps, double tol,
                                 std::uint64_t seed);

}  // namespace summ
