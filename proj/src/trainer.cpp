// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "pqft/error.hpp"
#include "pqft/evaluator.hpp"
#include "pqft/json_io.hpp"
#include "pqft/rng.hpp"

namespace pqft {

void TrainConfig::validate() const {
    auto fail = [](const std::string& msg) { throw Error(ErrorKind::Configuration, msg); };
    if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) fail("betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) fail("epsilon must be positive");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be non-negative");
    if (grad_accum_steps < 1) fail("grad_accum_steps must be >= 1");
    if (micro_batch_tokens < 1) fail("micro_batch_tokens must be >= 1");
    if (max_optimizer_steps < 1) fail("max_optimizer_steps must be >= 1");
    if (eval_every < 1) fail("eval_every must be >= 1");
    if (adapter.mode == AdapterMode::Lora) {
        adapter.lora.validate();
    } else if (adapter.prefix.num_virtual_tokens < 1) {
        fail("prefix tuning needs at least one virtual token");
    }
    eval_decode.validate();
}

double lr_at(std::size_t step, const TrainConfig& config) {
    if (step < config.warmup_steps) {
        return config.learning_rate * (static_cast<double>(step) / static_cast<double>(config.warmup_steps));
    }
    return config.learning_rate;
}

void adamw_step(std::span<Tensor> params, OptimizerState& state, double lr, const TrainConfig& config) {
    if (state.m.empty() && state.v.empty()) {
        for (const Tensor& p : params) {
            state.m.emplace_back(p.numel(), 0.0f);
            state.v.emplace_back(p.numel(), 0.0f);
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw Error(ErrorKind::Contract, "optimizer state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                                             std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) throw Error(ErrorKind::Contract, "parameter " + std::to_string(i) + " has no gradient");
        if (state.m[i].size() != params[i].numel()) throw Error(ErrorKind::Contract, "moment size mismatch");
    }

    const double t = static_cast<double>(state.step + 1);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto theta = params[i].data();
        auto grad = params[i].grad();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (std::size_t k = 0; k < theta.size(); ++k) {
            const double g = grad[k];
            const double mk = config.beta1 * m[k] + (1.0 - config.beta1) * g;
            const double vk = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
            m[k] = static_cast<float>(mk);
            v[k] = static_cast<float>(vk);
            const double m_hat = mk / bc1;
            const double v_hat = vk / bc2;
            const double th = theta[k];
            theta[k] = static_cast<float>(th - lr * (m_hat / (std::sqrt(v_hat) + config.epsilon) + config.weight_decay * th));
        }
    }
    ++state.step;
}

AdapterState AdapterState::attach(const ModelConfig& model, const AdapterConfig& config, std::uint64_t seed) {
    AdapterState s;
    s.config = config;
    if (config.mode == AdapterMode::Lora) {
        s.lora = LoraSet::attach(model, config.lora, seed);
    } else {
        if (config.prefix.num_virtual_tokens < 1) {
            throw Error(ErrorKind::Configuration, "prefix tuning needs at least one virtual token");
        }
        s.prefix = PrefixParams::init(model.d_model, config.prefix.num_virtual_tokens, seed);
    }
    for (auto& [name, t] : s.named_tensors()) t.set_requires_grad(true);
    return s;
}

std::vector<NamedTensor> AdapterState::named_tensors() const {
    return config.mode == AdapterMode::Lora ? lora.named_tensors() : prefix.named_tensors();
}

ForwardOptions AdapterState::options() const {
    ForwardOptions o;
    if (config.mode == AdapterMode::Lora) {
        o.lora = &lora;
    } else {
        o.prefix = &prefix;
    }
    return o;
}

AdapterState AdapterState::clone() const {
    AdapterState s;
    s.config = config;
    s.lora = lora.clone();
    s.prefix = prefix.clone();
    return s;
}

std::string render_metrics_jsonl(std::span<const MetricRecord> metrics) {
    std::string out;
    for (const auto& m : metrics) out += Json(m).dump() + "\n";
    return out;
}

std::vector<std::vector<std::size_t>> pack_micro_batches(std::span<const TrainingSequence> sequences,
                                                         std::span<const std::size_t> order, std::size_t budget) {
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> current;
    std::size_t used = 0;
    for (std::size_t idx : order) {
        const std::size_t len = sequences[idx].inputs.size();
        if (len > budget) {
            throw Error(ErrorKind::Configuration, "sequence of " + std::to_string(len) + " tokens exceeds micro_batch_tokens " +
                                                      std::to_string(budget));
        }
        if (used + len > budget) {
            batches.push_back(std::move(current));
            current.clear();
            used = 0;
        }
        current.push_back(idx);
        used += len;
    }
    if (!current.empty()) batches.push_back(std::move(current));
    return batches;
}

double accumulate_micro_batch(const ModelWeights& base, const ForwardOptions& options,
                              std::span<const TrainingSequence> sequences, std::span<const std::size_t> batch,
                              std::size_t grad_accum_steps) {
    std::size_t total_mask = 0;
    for (std::size_t idx : batch) {
        total_mask += static_cast<std::size_t>(std::count(sequences[idx].mask.begin(), sequences[idx].mask.end(), 1));
    }
    if (total_mask == 0) throw Error(ErrorKind::DegenerateBatch, "micro-batch has no loss tokens");

    double batch_loss = 0.0;
    for (std::size_t idx : batch) {
        const TrainingSequence& seq = sequences[idx];
        const auto n_mask = static_cast<std::size_t>(std::count(seq.mask.begin(), seq.mask.end(), 1));
        const double share = static_cast<double>(n_mask) / static_cast<double>(total_mask);
        Tape tape;
        ForwardOptions fo = options;
        fo.prefix_position = seq.question_start;
        Tensor loss = cross_entropy(forward(base, seq.inputs, fo), seq.targets, seq.mask);
        const double value = loss.item();
        if (!std::isfinite(value)) {
            std::ostringstream ids;
            for (std::size_t i = 0; i < batch.size(); ++i) ids << (i ? "," : "") << batch[i];
            throw Error(ErrorKind::NumericFailure, "non-finite loss " + std::to_string(value) + " on sequence " +
                                                       std::to_string(idx) + " (micro-batch " + ids.str() + ")");
        }
        backward(scale(loss, static_cast<float>(share / static_cast<double>(grad_accum_steps))));
        batch_loss += share * value;
    }
    return batch_loss;
}

namespace {

struct BatchStream {
    std::span<const TrainingSequence> sequences;
    std::size_t budget;
    Rng rng;
    std::vector<std::vector<std::size_t>> queue;
    std::size_t next = 0;

    const std::vector<std::size_t>& pop() {
        if (next == queue.size()) {
            std::vector<std::size_t> order(sequences.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(order));
            queue = pack_micro_batches(sequences, order, budget);
            next = 0;
        }
        return queue[next++];
    }
};

bool better(const MetricRecord& a, const MetricRecord& b) {
    if (*a.val_accuracy != *b.val_accuracy) return *a.val_accuracy > *b.val_accuracy;
    return *a.val_macro_f1 > *b.val_macro_f1;
}

}  // namespace

TrainResult train(const ModelWeights& base, AdapterState adapter, std::span<const PubMedQARecord> train_set,
                  std::span<const PubMedQARecord> validation_set, const TrainConfig& config, const TrainHooks& hooks) {
    config.validate();
    if (train_set.empty()) throw Error(ErrorKind::DegenerateBatch, "empty training set");
    if (!(adapter.config == config.adapter)) throw Error(ErrorKind::Configuration, "adapter does not match train.adapter");

    base.set_requires_grad(false);
    std::vector<Tensor> params;
    for (auto& [name, t] : adapter.named_tensors()) {
        t.set_requires_grad(true);
        params.push_back(t);
    }

    const std::size_t limit = base.config.max_seq_len - std::min(base.config.max_seq_len, adapter.virtual_tokens());
    std::vector<TrainingSequence> sequences;
    sequences.reserve(train_set.size());
    for (const auto& r : train_set) sequences.push_back(to_training(format_example(r, limit)));

    BatchStream stream{sequences, config.micro_batch_tokens, Rng(derive_seed(config.seed, "train.order")), {}, 0};
    const ForwardOptions options = adapter.options();
    OptimizerState opt;
    TrainResult result;
    std::optional<MetricRecord> best_record;

    auto snapshot = [&](std::size_t step) {
        Checkpoint c;
        c.base = base;
        c.adapter = adapter.clone();
        c.optimizer = opt;
        c.step = step;
        c.rng_state = stream.rng.save_state();
        c.metrics = result.metrics;
        return c;
    };

    for (std::size_t step = 0; step < config.max_optimizer_steps; ++step) {
        double window_loss = 0.0;
        for (std::size_t a = 0; a < config.grad_accum_steps; ++a) {
            const auto& batch = stream.pop();
            try {
                window_loss += accumulate_micro_batch(base, options, sequences, batch, config.grad_accum_steps);
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::NumericFailure) throw;
                throw Error(ErrorKind::NumericFailure, "optimizer step " + std::to_string(step + 1) + ": " + e.what());
            }
            ++result.micro_batches;
        }
        MetricRecord rec;
        rec.step = step + 1;
        rec.lr = lr_at(step, config);
        rec.train_loss = window_loss / static_cast<double>(config.grad_accum_steps);
        adamw_step(params, opt, rec.lr, config);
        for (Tensor& p : params) p.clear_grad();

        const bool last = step + 1 == config.max_optimizer_steps;
        if (!validation_set.empty() && ((step + 1) % config.eval_every == 0 || last)) {
            EvalOptions eo;
            eo.decode = config.eval_decode;
            const EvalResult ev = evaluate(base, options, validation_set, eo);
            rec.val_accuracy = ev.report.accuracy;
            rec.val_macro_f1 = ev.report.macro_f1;
        }
        result.metrics.push_back(rec);
        if (rec.val_accuracy && (!best_record || better(rec, *best_record))) {
            best_record = rec;
            result.best = snapshot(rec.step);
            result.best_step = rec.step;
        }
        if (hooks.on_step) hooks.on_step(rec);
    }

    result.last = snapshot(config.max_optimizer_steps);
    if (!best_record) {
        result.best = snapshot(config.max_optimizer_steps);
        result.best_step = config.max_optimizer_steps;
    }
    return result;
}

ModelWeights warm_phase(const ModelWeights& init, std::span<const PubMedQARecord> records, const WarmPhaseConfig& config,
                        const TrainHooks& hooks) {
    ModelWeights weights = init.clone();
    if (config.steps == 0) return weights;
    if (records.empty()) throw Error(ErrorKind::DegenerateBatch, "warm phase needs context passages");

    std::vector<TrainingSequence> sequences;
    for (const auto& r : records) {
        std::vector<int> ids{ByteTokenizer::kBos};
        const auto body = ByteTokenizer::encode(join_contexts(r.contexts));
        ids.insert(ids.end(), body.begin(), body.end());
        ids.push_back(ByteTokenizer::kEos);
        if (ids.size() > weights.config.max_seq_len) ids.resize(weights.config.max_seq_len);
        TrainingSequence seq;
        seq.inputs.assign(ids.begin(), ids.end() - 1);
        seq.targets.assign(ids.begin() + 1, ids.end());
        seq.mask.assign(seq.targets.size(), 1);
        sequences.push_back(std::move(seq));
    }

    TrainConfig tc;
    tc.learning_rate = config.learning_rate;
    tc.warmup_steps = config.warmup_steps;
    tc.weight_decay = 0.0;
    std::vector<Tensor> params;
    for (auto& [name, t] : weights.named_tensors()) {
        t.set_requires_grad(true);
        params.push_back(t);
    }
    BatchStream stream{sequences, config.micro_batch_tokens, Rng(derive_seed(config.seed, "warm.order")), {}, 0};
    OptimizerState opt;
    for (std::size_t step = 0; step < config.steps; ++step) {
        MetricRecord rec;
        rec.step = step + 1;
        rec.lr = lr_at(step, tc);
        rec.train_loss = accumulate_micro_batch(weights, {}, sequences, stream.pop(), 1);
        adamw_step(params, opt, rec.lr, tc);
        for (Tensor& p : params) p.clear_grad();
        if (hooks.on_step) hooks.on_step(rec);
    }
    weights.set_requires_grad(false);
    return weights;
}

}  // namespace pqft
