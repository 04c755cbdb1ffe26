// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>

#include <json.hpp>

#include "pqft/adapters.hpp"
#include "pqft/decoder.hpp"
#include "pqft/error.hpp"
#include "pqft/model_config.hpp"
#include "pqft/trainer.hpp"

// JSON mappings for the configuration structs. Readers reject unknown keys and
// wrong types with a configuration error; missing keys keep their defaults.
namespace pqft {

using Json = nlohmann::ordered_json;

// Reads fields of one JSON object into typed slots. Absent keys keep the
// slot's value; finish() rejects keys nobody asked for.
class JsonReader {
  public:
    JsonReader(const Json& j, std::string what) : j_(j), what_(std::move(what)) {
        if (!j.is_object()) throw Error(ErrorKind::Configuration, what_ + " must be an object");
    }

    template <class T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        try {
            out = it->template get<T>();
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Configuration, what_ + "." + key + ": " + e.what());
        }
    }

    void finish() const {
        for (const auto& [key, value] : j_.items()) {
            if (!seen_.contains(key)) throw Error(ErrorKind::Configuration, "unknown field " + what_ + "." + key);
        }
    }

  private:
    const Json& j_;
    std::string what_;
    std::set<std::string> seen_;
};

void to_json(Json& j, const ModelConfig& c);
void from_json(const Json& j, ModelConfig& c);
void to_json(Json& j, const LoraConfig& c);
void from_json(const Json& j, LoraConfig& c);
void to_json(Json& j, const PrefixConfig& c);
void from_json(const Json& j, PrefixConfig& c);
void to_json(Json& j, const AdapterConfig& c);
void from_json(const Json& j, AdapterConfig& c);
void to_json(Json& j, const DecodeConfig& c);
void from_json(const Json& j, DecodeConfig& c);
void to_json(Json& j, const TrainConfig& c);
void from_json(const Json& j, TrainConfig& c);
void to_json(Json& j, const MetricRecord& m);
void from_json(const Json& j, MetricRecord& m);

// Shortest decimal that round-trips the float, as a double.
double json_float(float value);

}  // namespace pqft
