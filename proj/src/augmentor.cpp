// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include "pqft/augmentor.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "pqft/error.hpp"
#include "pqft/rng.hpp"
#include "pqft/sha256.hpp"
#include "pqft/synthetic.hpp"

namespace pqft {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(AugmentStrategy strategy) {
    switch (strategy) {
        case AugmentStrategy::RewriteQA: return "rewriteQA";
        case AugmentStrategy::NewQA: return "newQA";
        case AugmentStrategy::CombinedQA: return "combinedQA";
    }
    return "unknown";
}

AugmentStrategy parse_strategy(std::string_view text) {
    std::string lower;
    for (unsigned char c : text) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "rewriteqa") return AugmentStrategy::RewriteQA;
    if (lower == "newqa") return AugmentStrategy::NewQA;
    if (lower == "combinedqa") return AugmentStrategy::CombinedQA;
    throw Error(ErrorKind::Configuration, "unknown augmentation strategy '" + std::string(text) + "'");
}

void GenerationRequest::validate() const {
    if (prompt.empty()) throw Error(ErrorKind::Contract, "generation prompt is empty");
    if (model.empty()) throw Error(ErrorKind::Contract, "generation model id is empty");
    if (!(temperature >= 0.0)) throw Error(ErrorKind::Contract, "generation temperature must be >= 0");
    if (max_tokens == 0) throw Error(ErrorKind::Contract, "max_tokens must be positive");
}

std::string GenerationRequest::canonical() const {
    // nlohmann::json keeps object keys sorted.
    json j;
    j["prompt"] = prompt;
    j["model"] = model;
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    return j.dump();
}

std::string GenerationRequest::hash() const { return sha256_hex(canonical()); }

GenerationRequest GenerationRequest::from_canonical(std::string_view text) {
    try {
        const json j = json::parse(text);
        GenerationRequest r;
        r.prompt = j.at("prompt").get<std::string>();
        r.model = j.at("model").get<std::string>();
        r.temperature = j.at("temperature").get<double>();
        r.max_tokens = j.at("max_tokens").get<std::size_t>();
        return r;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Format, std::string("malformed generation request: ") + e.what());
    }
}

GeneratedFields fields_of(const PubMedQARecord& record) {
    return {record.question, record.contexts, record.long_answer, record.final_decision};
}

namespace {

std::string one_line(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string render_generation(const GeneratedFields& f) {
    std::string out = "QUESTION: " + one_line(f.question) + "\n";
    for (const auto& c : f.contexts) out += "CONTEXT: " + one_line(c) + "\n";
    out += "LONG_ANSWER: " + one_line(f.long_answer) + "\n";
    out += "DECISION: " + std::string(to_string(f.decision)) + "\n";
    return out;
}

GeneratedFields parse_generation(std::string_view text) {
    std::optional<std::string> question, long_answer, decision;
    std::vector<std::string> contexts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        auto value_of = [&](std::string_view key) -> std::optional<std::string> {
            if (line.substr(0, key.size()) != key) return std::nullopt;
            return std::string(trim(line.substr(key.size())));
        };
        if (auto v = value_of("QUESTION:"); v && !question) {
            question = std::move(v);
        } else if (auto c = value_of("CONTEXT:")) {
            if (!c->empty()) contexts.push_back(std::move(*c));
        } else if (auto a = value_of("LONG_ANSWER:"); a && !long_answer) {
            long_answer = std::move(a);
        } else if (auto d = value_of("DECISION:"); d && !decision) {
            decision = std::move(d);
        }
    }
    if (!question || question->empty()) throw Error(ErrorKind::Parse, "missing field QUESTION");
    if (contexts.empty()) throw Error(ErrorKind::Parse, "missing field CONTEXT");
    if (!long_answer || long_answer->empty()) throw Error(ErrorKind::Parse, "missing field LONG_ANSWER");
    if (!decision || decision->empty()) throw Error(ErrorKind::Parse, "missing field DECISION");
    const auto label = parse_label(*decision);
    if (!label) throw Error(ErrorKind::Validation, "DECISION '" + *decision + "' is not yes, no or maybe");
    return {std::move(*question), std::move(contexts), std::move(*long_answer), *label};
}

namespace {

constexpr std::string_view kSourceMarker = "Source record:\n";

constexpr std::string_view kReplyFormat =
    "Reply with exactly these lines and nothing else:\n"
    "QUESTION: <the question>\n"
    "CONTEXT: <one line per context passage>\n"
    "LONG_ANSWER: <the conclusion>\n"
    "DECISION: <yes, no or maybe>\n";

}  // namespace

GenerationRequest build_prompt(AugmentStrategy strategy, const PubMedQARecord* source, std::size_t variant,
                               const PromptSettings& settings) {
    std::string prompt;
    switch (strategy) {
        case AugmentStrategy::RewriteQA:
            if (source == nullptr) throw Error(ErrorKind::Contract, "rewriteQA needs a source record");
            prompt =
                "You are helping to build a biomedical question answering dataset.\n"
                "Write a faithful paraphrase of the source record below. Reword the question, every context "
                "passage and the long answer without changing their meaning. The decision must stay the same.\n";
            if (variant > 0) prompt += "This is alternative wording number " + std::to_string(variant + 1) + ".\n";
            prompt += std::string(kReplyFormat) + "\n" + std::string(kSourceMarker) + render_generation(fields_of(*source));
            break;
        case AugmentStrategy::NewQA:
            prompt =
                "You are helping to build a biomedical question answering dataset.\n"
                "Invent one new research question about a clinical study that can be answered yes, no or maybe, "
                "with the study abstract passages that answer it, a one sentence conclusion and the decision.\n"
                "Request number " +
                std::to_string(variant + 1) + ".\n";
            if (source != nullptr) prompt += "Stay close to this topic: " + one_line(source->long_answer) + "\n";
            prompt += kReplyFormat;
            break;
        case AugmentStrategy::CombinedQA:
            throw Error(ErrorKind::Contract, "combinedQA has no prompt of its own");
    }
    GenerationRequest r{std::move(prompt), settings.model, settings.temperature, settings.max_tokens};
    r.validate();
    return r;
}

namespace {

std::uint64_t hash_seed(const std::string& hex) { return std::stoull(hex.substr(0, 16), nullptr, 16); }

std::vector<std::string> split_sentences(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        if ((text[i] == '.' || text[i] == '?' || text[i] == '!') && text[i + 1] == ' ') {
            out.push_back(text.substr(start, i + 1 - start));
            start = i + 2;
        }
    }
    if (start < text.size()) out.push_back(text.substr(start));
    return out;
}

std::string shuffle_sentences(Rng& rng, const std::string& text) {
    auto sentences = split_sentences(text);
    rng.shuffle(std::span<std::string>(sentences));
    std::string out;
    for (const auto& s : sentences) out += (out.empty() ? "" : " ") + s;
    return out;
}

// "Does x reduce y in z?" -> "in z, does x reduce y". Comma-separated clauses
// are reversed as they stand; otherwise a trailing "in ..." phrase is moved up.
std::string reverse_clauses(std::string_view question) {
    std::string q(trim(question));
    while (!q.empty() && (q.back() == '?' || q.back() == '.')) q.pop_back();
    std::vector<std::string> clauses;
    std::size_t start = 0, comma;
    while ((comma = q.find(", ", start)) != std::string::npos) {
        clauses.push_back(q.substr(start, comma - start));
        start = comma + 2;
    }
    clauses.push_back(q.substr(start));
    if (clauses.size() == 1) {
        const std::size_t in = q.rfind(" in ");
        if (in != std::string::npos && in > 0) clauses = {q.substr(0, in), q.substr(in + 1)};
    }
    std::reverse(clauses.begin(), clauses.end());
    std::string out;
    for (auto& c : clauses) {
        if (!c.empty()) c[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(c[0])));
        out += (out.empty() ? "" : ", ") + c;
    }
    return out;
}

}  // namespace

std::string MockBackend::generate(const GenerationRequest& request) {
    const std::string hash = request.hash();
    Rng rng(hash_seed(hash) ^ seed_);
    const auto marker = request.prompt.find(kSourceMarker);
    if (marker != std::string::npos) {
        GeneratedFields f = parse_generation(std::string_view(request.prompt).substr(marker + kSourceMarker.size()));
        f.question = "It is asked whether " + reverse_clauses(f.question) + "?";
        for (auto& c : f.contexts) c = shuffle_sentences(rng, c);
        rng.shuffle(std::span<std::string>(f.contexts));
        f.long_answer = shuffle_sentences(rng, f.long_answer);
        return render_generation(f);
    }
    const auto label = static_cast<Label>(rng.below(kNumClasses));
    PubMedQARecord r = synthesize_record(rng, label, "");
    // The cohort tag keeps outputs of distinct requests distinct.
    for (auto& c : r.contexts) {
        if (c.rfind("We followed", 0) == 0 && !c.empty()) {
            c.pop_back();
            c += " (cohort " + hash.substr(0, 8) + ").";
        }
    }
    return render_generation(fields_of(r));
}

CachingBackend::CachingBackend(std::shared_ptr<GenerationBackend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    if (!inner_) throw Error(ErrorKind::Contract, "caching backend needs an inner backend");
    std::filesystem::create_directories(dir_);
}

std::optional<std::string> CachingBackend::lookup(const GenerationRequest& request) const {
    const auto path = path_for(request.hash());
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        const json entry = json::parse(buf.str());
        const auto stored = GenerationRequest::from_canonical(entry.at("request").dump());
        if (!(stored == request)) throw Error(ErrorKind::CorruptFile, "cache entry " + path.string() + " holds another request");
        return entry.at("response").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::CorruptFile, "unreadable cache entry " + path.string() + ": " + e.what());
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::CorruptFile) throw;
        throw Error(ErrorKind::CorruptFile, "unreadable cache entry " + path.string() + ": " + e.what());
    }
}

std::string CachingBackend::generate(const GenerationRequest& request) {
    request.validate();
    const std::string hash = request.hash();
    std::shared_ptr<std::mutex> slot;
    {
        std::lock_guard lock(mu_);
        auto& s = in_flight_[hash];
        if (!s) s = std::make_shared<std::mutex>();
        slot = s;
    }
    std::lock_guard hold(*slot);
    if (auto hit = lookup(request)) return *hit;

    std::string response = inner_->generate(request);
    json entry;
    entry["request"] = json::parse(request.canonical());
    entry["response"] = response;
    const auto path = path_for(hash);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
        out << entry.dump(2) << "\n";
        if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    return response;
}

std::string CountingBackend::generate(const GenerationRequest& request) {
    ++calls_;
    return inner_->generate(request);
}

RemoteChatBackend::RemoteChatBackend(RemoteSettings settings) : settings_(std::move(settings)) {
    const std::string& url = settings_.base_url;
    const auto scheme = url.find("://");
    if (scheme == std::string::npos) throw Error(ErrorKind::Configuration, "backend base url lacks a scheme: " + url);
    const auto slash = url.find('/', scheme + 3);
    origin_ = url.substr(0, slash);
    path_ = slash == std::string::npos ? "" : url.substr(slash);
    while (!path_.empty() && path_.back() == '/') path_.pop_back();
    path_ += "/chat/completions";
}

std::string RemoteChatBackend::request_body(const GenerationRequest& request) {
    ordered_json j;
    j["model"] = request.model;
    j["messages"] = ordered_json::array({{{"role", "user"}, {"content", request.prompt}}});
    j["temperature"] = request.temperature;
    j["max_tokens"] = request.max_tokens;
    return j.dump();
}

std::string RemoteChatBackend::reply_text(std::string_view response_body) {
    try {
        const json j = json::parse(response_body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, std::string("malformed chat completion response: ") + e.what());
    }
}

std::string RemoteChatBackend::generate(const GenerationRequest& request) {
    request.validate();
    httplib::Client client(origin_);
    client.set_connection_timeout(settings_.timeout);
    client.set_read_timeout(settings_.timeout);
    client.set_write_timeout(settings_.timeout);
    httplib::Headers headers;
    if (const char* key = std::getenv(settings_.api_key_env.c_str()); key != nullptr && *key != '\0') {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string body = request_body(request);

    std::string last_error;
    auto backoff = settings_.initial_backoff;
    for (std::size_t attempt = 0; attempt <= settings_.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
        auto res = client.Post(path_, headers, body, "application/json");
        if (!res) {
            last_error = "request to " + origin_ + path_ + " failed: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 200 && res->status < 300) return reply_text(res->body);
        last_error = "HTTP " + std::to_string(res->status) + " from " + origin_ + path_;
        if (res->status != 429 && res->status < 500) throw Error(ErrorKind::Transport, last_error);
    }
    throw Error(ErrorKind::Transport, last_error + " (after " + std::to_string(settings_.max_retries) + " retries)");
}

std::string normalize_question(std::string_view question) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : question) {
        if (std::ispunct(c)) continue;
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

namespace {

struct Job {
    GenerationRequest request;
    const PubMedQARecord* source = nullptr;
    std::size_t variant = 0;
};

struct Outcome {
    std::optional<std::string> text;
    std::string error;
};

std::vector<Job> plan_jobs(std::span<const PubMedQARecord> train, AugmentStrategy strategy, const AugmentOptions& o) {
    std::vector<Job> jobs;
    if (strategy == AugmentStrategy::RewriteQA) {
        for (const auto& source : train) {
            for (std::size_t k = 0; k < o.n_per_source; ++k) {
                jobs.push_back({build_prompt(strategy, &source, k, o.prompt), &source, k});
            }
        }
    } else {
        const std::size_t n = train.size() * o.n_per_source;
        for (std::size_t j = 0; j < n; ++j) jobs.push_back({build_prompt(strategy, nullptr, j, o.prompt), nullptr, j});
    }
    return jobs;
}

void write_progress(const std::filesystem::path& path, AugmentStrategy strategy, const std::vector<Job>& jobs,
                    const std::vector<Outcome>& outcomes, const std::vector<std::uint8_t>& done, const std::string& error) {
    ordered_json j;
    j["strategy"] = to_string(strategy);
    j["requests"] = jobs.size();
    j["error"] = error;
    ordered_json completed = ordered_json::array(), pending = ordered_json::array();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        (done[i] && outcomes[i].text ? completed : pending).push_back(jobs[i].request.hash());
    }
    j["completed"] = completed;
    j["pending"] = pending;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << j.dump(2) << "\n";
}

std::vector<Outcome> fan_out(const std::vector<Job>& jobs, AugmentStrategy strategy, GenerationBackend& backend,
                             const AugmentOptions& options) {
    std::vector<Outcome> outcomes(jobs.size());
    std::vector<std::uint8_t> done(jobs.size(), 0);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> abort{false};
    std::mutex mu;
    std::optional<Error> transport;
    std::exception_ptr fatal;

    auto work = [&] {
        for (;;) {
            if (abort.load()) return;
            const std::size_t i = next++;
            if (i >= jobs.size()) return;
            try {
                outcomes[i].text = backend.generate(jobs[i].request);
            } catch (const Error& e) {
                outcomes[i].error = e.what();
                if (e.kind() == ErrorKind::Transport) {
                    std::lock_guard lock(mu);
                    if (!transport) transport = e;
                    abort = true;
                } else if (e.kind() != ErrorKind::Parse && e.kind() != ErrorKind::Validation) {
                    std::lock_guard lock(mu);
                    if (!fatal) fatal = std::current_exception();
                    abort = true;
                }
            } catch (...) {
                std::lock_guard lock(mu);
                if (!fatal) fatal = std::current_exception();
                abort = true;
            }
            done[i] = 1;
        }
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.concurrency, jobs.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (fatal) std::rethrow_exception(fatal);
    if (transport) {
        std::string message = transport->what();
        message.erase(0, to_string(ErrorKind::Transport).size() + 2);
        if (options.progress_path) {
            write_progress(*options.progress_path, strategy, jobs, outcomes, done, message);
            message += "; progress written to " + options.progress_path->string();
        }
        throw Error(ErrorKind::Transport, message);
    }
    return outcomes;
}

void run_strategy(std::span<const PubMedQARecord> train, AugmentStrategy strategy, GenerationBackend& backend,
                  const AugmentOptions& options, std::set<std::string>& seen, AugmentResult& result) {
    const auto jobs = plan_jobs(train, strategy, options);
    const auto outcomes = fan_out(jobs, strategy, backend, options);
    StrategyStats stats;
    stats.strategy = strategy;
    stats.requests = jobs.size();
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const Job& job = jobs[i];
        if (!outcomes[i].text) {
            ++stats.parse_failures;
            stats.failures.push_back({i, outcomes[i].error});
            continue;
        }
        GeneratedFields f;
        try {
            f = parse_generation(*outcomes[i].text);
        } catch (const Error& e) {
            ++stats.parse_failures;
            stats.failures.push_back({i, e.what()});
            continue;
        }
        if (job.source != nullptr && f.decision != job.source->final_decision) {
            ++stats.label_mismatches;
            continue;
        }
        const std::string key = normalize_question(f.question);
        if (!seen.insert(key).second) {
            ++stats.dedup_drops;
            continue;
        }
        AugmentedRecord a;
        a.strategy = strategy;
        a.model = job.request.model;
        a.request_hash = job.request.hash();
        if (job.source != nullptr) {
            a.source_id = job.source->id;
            a.record.id = job.source->id + "-rw" + std::to_string(job.variant + 1);
        } else {
            a.record.id = "new-" + a.request_hash.substr(0, 12);
        }
        a.record.question = std::move(f.question);
        a.record.contexts = std::move(f.contexts);
        a.record.long_answer = std::move(f.long_answer);
        a.record.final_decision = f.decision;
        result.records.push_back(std::move(a));
        ++stats.kept;
    }
    result.stats.push_back(std::move(stats));
}

}  // namespace

AugmentResult augment(std::span<const PubMedQARecord> train, AugmentStrategy strategy, GenerationBackend& backend,
                      const AugmentOptions& options) {
    if (train.empty()) throw Error(ErrorKind::Contract, "augment needs at least one training record");
    if (options.n_per_source == 0) throw Error(ErrorKind::Contract, "n_per_source must be at least 1");
    std::set<std::string> seen;
    for (const auto& r : train) seen.insert(normalize_question(r.question));
    AugmentResult result;
    if (strategy == AugmentStrategy::CombinedQA) {
        run_strategy(train, AugmentStrategy::RewriteQA, backend, options, seen, result);
        run_strategy(train, AugmentStrategy::NewQA, backend, options, seen, result);
    } else {
        run_strategy(train, strategy, backend, options, seen, result);
    }
    return result;
}

std::string AugmentResult::summary_json() const {
    ordered_json j;
    ordered_json rows = ordered_json::array();
    std::size_t kept = 0;
    for (const auto& s : stats) {
        ordered_json row;
        row["strategy"] = to_string(s.strategy);
        row["requests"] = s.requests;
        row["parse_failures"] = s.parse_failures;
        row["label_mismatches"] = s.label_mismatches;
        row["dedup_drops"] = s.dedup_drops;
        row["kept"] = s.kept;
        ordered_json failures = ordered_json::array();
        for (const auto& f : s.failures) failures.push_back({{"index", f.index}, {"message", f.message}});
        row["failures"] = failures;
        rows.push_back(row);
        kept += s.kept;
    }
    j["strategies"] = rows;
    j["kept"] = kept;
    return j.dump(2) + "\n";
}

std::vector<PubMedQARecord> augmented_training_set(std::span<const PubMedQARecord> train,
                                                   std::span<const AugmentedRecord> generated) {
    std::vector<PubMedQARecord> out(train.begin(), train.end());
    for (const auto& a : generated) out.push_back(a.record);
    return out;
}

std::string render_augmented_jsonl(std::span<const AugmentedRecord> records) {
    std::string out;
    for (const auto& a : records) {
        ordered_json j;
        j["id"] = a.record.id;
        j["question"] = a.record.question;
        j["contexts"] = a.record.contexts;
        j["long_answer"] = a.record.long_answer;
        j["final_decision"] = to_string(a.record.final_decision);
        j["strategy"] = to_string(a.strategy);
        j["source_id"] = a.source_id;
        j["model"] = a.model;
        j["request_hash"] = a.request_hash;
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<AugmentedRecord> parse_augmented_jsonl(std::string_view text) {
    std::vector<AugmentedRecord> out;
    std::size_t pos = 0, line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "augmented line " + std::to_string(line_no);
        try {
            const json j = json::parse(line);
            AugmentedRecord a;
            a.record.id = j.at("id").get<std::string>();
            a.record.question = j.at("question").get<std::string>();
            a.record.contexts = j.at("contexts").get<std::vector<std::string>>();
            a.record.long_answer = j.at("long_answer").get<std::string>();
            const auto label = parse_label(j.at("final_decision").get<std::string>());
            if (!label) throw Error(ErrorKind::Record, where + ": bad final_decision");
            a.record.final_decision = *label;
            a.strategy = parse_strategy(j.at("strategy").get<std::string>());
            if (a.strategy == AugmentStrategy::CombinedQA) throw Error(ErrorKind::Record, where + ": combinedQA is not a record strategy");
            a.source_id = j.at("source_id").get<std::string>();
            a.model = j.at("model").get<std::string>();
            a.request_hash = j.at("request_hash").get<std::string>();
            out.push_back(std::move(a));
        } catch (const json::exception& e) {
            throw Error(ErrorKind::Format, where + ": " + e.what());
        }
    }
    return out;
}

}  // namespace pqft
