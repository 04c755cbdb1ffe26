// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/json_io.hpp"

#include <charconv>
#include <string>

#include "pqft/error.hpp"

namespace pqft {

double json_float(float value) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::stod(std::string(buf, res.ptr));
}

namespace {

using Reader = JsonReader;

// Floats travel through JSON as doubles.
void get_float(Reader& r, const char* key, float& out) {
    double d = out;
    r.get(key, d);
    out = static_cast<float>(d);
}

}  // namespace

void to_json(Json& j, const ModelConfig& c) {
    j = Json{{"n_layers", c.n_layers}, {"n_heads", c.n_heads},       {"d_model", c.d_model},
             {"d_ff", c.d_ff},         {"vocab_size", c.vocab_size}, {"max_seq_len", c.max_seq_len}};
}

void from_json(const Json& j, ModelConfig& c) {
    Reader r(j, "model");
    r.get("n_layers", c.n_layers);
    r.get("n_heads", c.n_heads);
    r.get("d_model", c.d_model);
    r.get("d_ff", c.d_ff);
    r.get("vocab_size", c.vocab_size);
    r.get("max_seq_len", c.max_seq_len);
    r.finish();
}

void to_json(Json& j, const LoraConfig& c) {
    Json targets = Json::array();
    for (Projection p : c.targets) targets.push_back(std::string(to_string(p)));
    j = Json{{"rank", c.rank}, {"alpha", json_float(c.alpha)}, {"targets", targets}};
}

void from_json(const Json& j, LoraConfig& c) {
    Reader r(j, "lora");
    r.get("rank", c.rank);
    get_float(r, "alpha", c.alpha);
    std::vector<std::string> names;
    for (Projection p : c.targets) names.emplace_back(to_string(p));
    r.get("targets", names);
    c.targets.clear();
    for (const auto& n : names) c.targets.push_back(projection_from_string(n));
    r.finish();
}

void to_json(Json& j, const PrefixConfig& c) { j = Json{{"num_virtual_tokens", c.num_virtual_tokens}}; }

void from_json(const Json& j, PrefixConfig& c) {
    Reader r(j, "prefix");
    r.get("num_virtual_tokens", c.num_virtual_tokens);
    r.finish();
}

void to_json(Json& j, const AdapterConfig& c) {
    j = Json{{"mode", std::string(to_string(c.mode))}, {"lora", c.lora}, {"prefix", c.prefix}};
}

void from_json(const Json& j, AdapterConfig& c) {
    Reader r(j, "adapter");
    std::string mode(to_string(c.mode));
    r.get("mode", mode);
    c.mode = adapter_mode_from_string(mode);
    r.get("lora", c.lora);
    r.get("prefix", c.prefix);
    r.finish();
}

void to_json(Json& j, const DecodeConfig& c) {
    j = Json{{"repetition_penalty", json_float(c.repetition_penalty)},
             {"temperature", json_float(c.temperature)},
             {"num_beams", c.num_beams},
             {"max_new_tokens", c.max_new_tokens},
             {"eos_id", c.eos_id}};
}

void from_json(const Json& j, DecodeConfig& c) {
    Reader r(j, "decode");
    get_float(r, "repetition_penalty", c.repetition_penalty);
    get_float(r, "temperature", c.temperature);
    r.get("num_beams", c.num_beams);
    r.get("max_new_tokens", c.max_new_tokens);
    r.get("eos_id", c.eos_id);
    r.finish();
}

void to_json(Json& j, const TrainConfig& c) {
    j = Json{{"learning_rate", c.learning_rate},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"epsilon", c.epsilon},
             {"weight_decay", c.weight_decay},
             {"grad_accum_steps", c.grad_accum_steps},
             {"micro_batch_tokens", c.micro_batch_tokens},
             {"warmup_steps", c.warmup_steps},
             {"max_optimizer_steps", c.max_optimizer_steps},
             {"eval_every", c.eval_every},
             {"seed", c.seed},
             {"adapter", c.adapter},
             {"eval_decode", c.eval_decode}};
}

void from_json(const Json& j, TrainConfig& c) {
    Reader r(j, "train");
    r.get("learning_rate", c.learning_rate);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("epsilon", c.epsilon);
    r.get("weight_decay", c.weight_decay);
    r.get("grad_accum_steps", c.grad_accum_steps);
    r.get("micro_batch_tokens", c.micro_batch_tokens);
    r.get("warmup_steps", c.warmup_steps);
    r.get("max_optimizer_steps", c.max_optimizer_steps);
    r.get("eval_every", c.eval_every);
    r.get("seed", c.seed);
    r.get("adapter", c.adapter);
    r.get("eval_decode", c.eval_decode);
    r.finish();
}

void to_json(Json& j, const MetricRecord& m) {
    j = Json{{"step", m.step}, {"lr", m.lr}, {"train_loss", m.train_loss}};
    if (m.val_accuracy) j["val_accuracy"] = *m.val_accuracy;
    if (m.val_macro_f1) j["val_macro_f1"] = *m.val_macro_f1;
}

void from_json(const Json& j, MetricRecord& m) {
    m.step = j.at("step").get<std::size_t>();
    m.lr = j.at("lr").get<double>();
    m.train_loss = j.at("train_loss").get<double>();
    m.val_accuracy = j.contains("val_accuracy") ? std::optional(j["val_accuracy"].get<double>()) : std::nullopt;
    m.val_macro_f1 = j.contains("val_macro_f1") ? std::optional(j["val_macro_f1"].get<double>()) : std::nullopt;
}

}  // namespace pqft
