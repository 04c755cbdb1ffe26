// Copyright 2026 The pqft Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "pqft/augmentor.hpp"
#include "pqft/error.hpp"
#include "pqft/synthetic.hpp"

using namespace pqft;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("pqft_aug_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// Replies with the source question unchanged.
class EchoBackend final : public GenerationBackend {
  public:
    std::string generate(const GenerationRequest& request) override {
        const auto at = request.prompt.find("Source record:\n");
        return request.prompt.substr(at + 15);
    }
    std::string name() const override { return "echo"; }
};

// Fails the way a flaky service does: selected request numbers misbehave.
class ScriptedBackend final : public GenerationBackend {
  public:
    explicit ScriptedBackend(std::function<std::string(const GenerationRequest&)> fn) : fn_(std::move(fn)) {}
    std::string generate(const GenerationRequest& request) override { return fn_(request); }
    std::string name() const override { return "scripted"; }

  private:
    std::function<std::string(const GenerationRequest&)> fn_;
};

std::set<std::string> question_keys(const std::vector<AugmentedRecord>& records) {
    std::set<std::string> out;
    for (const auto& a : records) out.insert(normalize_question(a.record.question));
    return out;
}

}  // namespace

TEST_CASE("strategy names round-trip") {
    for (auto s : {AugmentStrategy::RewriteQA, AugmentStrategy::NewQA, AugmentStrategy::CombinedQA}) {
        CHECK(parse_strategy(to_string(s)) == s);
    }
    CHECK(parse_strategy("REWRITEqa") == AugmentStrategy::RewriteQA);
    CHECK_THROWS_AS(parse_strategy("paraphraseQA"), Error);
}

TEST_CASE("request hash is the digest of sorted-key json") {
    GenerationRequest r{"hello", "gpt-4", 0.5, 64};
    CHECK(r.canonical() == R"({"max_tokens":64,"model":"gpt-4","prompt":"hello","temperature":0.5})");
    CHECK(r.hash().size() == 64);
    CHECK(GenerationRequest::from_canonical(r.canonical()) == r);
    GenerationRequest other = r;
    other.temperature = 0.6;
    CHECK(other.hash() != r.hash());
    CHECK_THROWS_AS((GenerationRequest{"", "m", 0.5, 1}.validate()), Error);
}

TEST_CASE("prompt templates") {
    const auto records = synthesize_pubmedqa(6, 3);
    const auto& src = records[0];

    const auto rw = build_prompt(AugmentStrategy::RewriteQA, &src, 0);
    CHECK(rw.prompt.find(src.question) != std::string::npos);
    CHECK(rw.prompt.find("paraphrase") != std::string::npos);
    for (const char* key : {"QUESTION:", "CONTEXT:", "LONG_ANSWER:", "DECISION:"}) {
        CHECK(rw.prompt.find(key) != std::string::npos);
    }
    CHECK(build_prompt(AugmentStrategy::RewriteQA, &src, 0).prompt == rw.prompt);
    CHECK(build_prompt(AugmentStrategy::RewriteQA, &src, 1).prompt != rw.prompt);

    const auto fresh = build_prompt(AugmentStrategy::NewQA, nullptr, 4);
    const auto topical = build_prompt(AugmentStrategy::NewQA, &src, 4);
    for (const auto& r : records) {
        CHECK(fresh.prompt.find(r.question) == std::string::npos);
        CHECK(topical.prompt.find(r.question) == std::string::npos);
    }
    CHECK(topical.prompt.find(src.long_answer) != std::string::npos);
    CHECK(build_prompt(AugmentStrategy::NewQA, nullptr, 5).prompt != fresh.prompt);

    try {
        build_prompt(AugmentStrategy::RewriteQA, nullptr, 0);
        FAIL("expected a contract error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
    }
    CHECK_THROWS_AS(build_prompt(AugmentStrategy::CombinedQA, &src, 0), Error);
}

TEST_CASE("render then parse reproduces the fields") {
    Rng rng(11);
    for (std::size_t i = 0; i < 300; ++i) {
        PubMedQARecord r = synthesize_record(rng, static_cast<Label>(i % 3), "x");
        // Extra contexts and odd spacing inside fields.
        for (std::size_t k = 0; k < rng.below(3); ++k) r.contexts.push_back("Extra  passage " + std::to_string(k) + ": a, b.");
        const auto f = fields_of(r);
        CHECK(parse_generation(render_generation(f)) == f);
    }
}

TEST_CASE("parse_generation errors and normalization") {
    const std::string good = "QUESTION: q?\nCONTEXT: c\nLONG_ANSWER: a\nDECISION: Maybe\n";
    CHECK(parse_generation(good).decision == Label::Maybe);
    CHECK(parse_generation("Sure! Here it is.\n\n  " + good + "Hope this helps.").question == "q?");

    auto kind_and_text = [](const std::string& text) {
        try {
            parse_generation(text);
        } catch (const Error& e) {
            return std::make_pair(e.kind(), std::string(e.what()));
        }
        return std::make_pair(ErrorKind::Io, std::string());
    };
    auto [k1, m1] = kind_and_text("QUESTION: q?\nCONTEXT: c\nLONG_ANSWER: a\n");
    CHECK(k1 == ErrorKind::Parse);
    CHECK(m1.find("DECISION") != std::string::npos);
    auto [k2, m2] = kind_and_text("CONTEXT: c\nLONG_ANSWER: a\nDECISION: yes\n");
    CHECK(k2 == ErrorKind::Parse);
    CHECK(m2.find("QUESTION") != std::string::npos);
    auto [k3, m3] = kind_and_text("QUESTION: q?\nLONG_ANSWER: a\nDECISION: yes\n");
    CHECK(m3.find("CONTEXT") != std::string::npos);
    auto [k4, m4] = kind_and_text("QUESTION: q?\nCONTEXT: c\nLONG_ANSWER: a\nDECISION: probably\n");
    CHECK(k4 == ErrorKind::Validation);
}

TEST_CASE("normalize_question") {
    CHECK(normalize_question("  Does   X, reduce  Y?? ") == "does x reduce y");
    Rng rng(5);
    for (int i = 0; i < 500; ++i) {
        std::string s;
        for (std::size_t k = 0; k < rng.below(30); ++k) s.push_back(static_cast<char>(32 + rng.below(95)));
        const auto once = normalize_question(s);
        CHECK(normalize_question(once) == once);
        CHECK(once.find("  ") == std::string::npos);
    }
}

TEST_CASE("mock backend") {
    MockBackend mock(7);
    PubMedQARecord src;
    src.id = "1";
    src.question = "Does aspirin reduce mortality in adults?";
    src.contexts = {"First sentence. Second sentence.", "Third passage."};
    src.long_answer = "One. Two. Three.";
    src.final_decision = Label::No;

    const auto req = build_prompt(AugmentStrategy::RewriteQA, &src, 0);
    const std::string out = mock.generate(req);
    CHECK(mock.generate(req) == out);
    const auto f = parse_generation(out);
    CHECK(f.question == "It is asked whether in adults, does aspirin reduce mortality?");
    CHECK(f.decision == Label::No);
    CHECK(f.contexts.size() == 2);
    // Sentences are only reordered, so the multiset of characters is unchanged.
    auto letters = [](const std::vector<std::string>& parts) {
        std::string all;
        for (const auto& p : parts)
            for (char c : p)
                if (c != ' ') all.push_back(c);
        std::sort(all.begin(), all.end());
        return all;
    };
    CHECK(letters(f.contexts) == letters(src.contexts));
    CHECK(letters({f.long_answer}) == letters({src.long_answer}));

    // Every synthetic label survives the rewrite.
    for (const auto& r : synthesize_pubmedqa(60, 9)) {
        const auto g = parse_generation(mock.generate(build_prompt(AugmentStrategy::RewriteQA, &r, 0)));
        CHECK(g.decision == r.final_decision);
        CHECK(normalize_question(g.question) != normalize_question(r.question));
    }

    std::set<std::string> outputs;
    for (std::size_t j = 0; j < 50; ++j) {
        const std::string text = mock.generate(build_prompt(AugmentStrategy::NewQA, nullptr, j));
        CHECK_NOTHROW(parse_generation(text));
        outputs.insert(text);
    }
    CHECK(outputs.size() == 50);
    CHECK(MockBackend(8).generate(req) != out);
}

TEST_CASE("rewriteQA over 450 sources") {
    const auto train = synthesize_pubmedqa(450, 21);
    MockBackend mock(1);
    const auto result = augment(train, AugmentStrategy::RewriteQA, mock);
    REQUIRE(result.stats.size() == 1);
    CHECK(result.stats[0].requests == 450);
    CHECK(result.records.size() <= 450);
    CHECK(result.records.size() == result.stats[0].kept);
    CHECK(result.stats[0].kept + result.stats[0].dedup_drops + result.stats[0].parse_failures +
              result.stats[0].label_mismatches ==
          450);
    const auto full = augmented_training_set(train, result.records);
    CHECK(full.size() <= 900);
    CHECK(full.size() == 450 + result.records.size());

    std::map<std::string, Label> source_labels;
    for (const auto& r : train) source_labels[r.id] = r.final_decision;
    // The synthetic sources may repeat a question; generated ones never do.
    std::set<std::string> keys;
    for (const auto& r : train) keys.insert(normalize_question(r.question));
    for (const auto& a : result.records) CHECK(keys.insert(normalize_question(a.record.question)).second);
    for (const auto& a : result.records) {
        CHECK(a.strategy == AugmentStrategy::RewriteQA);
        CHECK(a.model == "mock");
        REQUIRE(source_labels.count(a.source_id) == 1);
        CHECK(a.record.final_decision == source_labels[a.source_id]);
    }
}

TEST_CASE("echoed questions never survive dedup") {
    const auto train = synthesize_pubmedqa(30, 2);
    EchoBackend echo;
    const auto result = augment(train, AugmentStrategy::RewriteQA, echo);
    CHECK(result.records.empty());
    CHECK(result.stats[0].dedup_drops == 30);
}

TEST_CASE("newQA request accounting and extra variants") {
    const auto train = synthesize_pubmedqa(20, 4);
    MockBackend mock(3);
    AugmentOptions o;
    o.n_per_source = 3;
    const auto fresh = augment(train, AugmentStrategy::NewQA, mock, o);
    CHECK(fresh.stats[0].requests == 60);
    for (const auto& a : fresh.records) {
        CHECK(a.source_id.empty());
        CHECK(a.record.id.rfind("new-", 0) == 0);
    }
    const auto rw = augment(train, AugmentStrategy::RewriteQA, mock, o);
    CHECK(rw.stats[0].requests == 60);
    CHECK(rw.records.size() <= 60);
}

TEST_CASE("combinedQA is the union of both strategies") {
    const auto train = synthesize_pubmedqa(40, 8);
    MockBackend mock(5);
    const auto rw = augment(train, AugmentStrategy::RewriteQA, mock);
    const auto nq = augment(train, AugmentStrategy::NewQA, mock);
    const auto both = augment(train, AugmentStrategy::CombinedQA, mock);
    REQUIRE(both.stats.size() == 2);
    CHECK(both.stats[0].strategy == AugmentStrategy::RewriteQA);
    CHECK(both.stats[1].strategy == AugmentStrategy::NewQA);

    std::set<std::string> expected = question_keys(rw.records);
    const auto more = question_keys(nq.records);
    expected.insert(more.begin(), more.end());
    CHECK(question_keys(both.records) == expected);
    CHECK(both.records.size() == expected.size());
    // Rewrites come first and are unaffected by the second run.
    for (std::size_t i = 0; i < rw.records.size(); ++i) CHECK(both.records[i] == rw.records[i]);
}

TEST_CASE("output does not depend on concurrency") {
    const auto train = synthesize_pubmedqa(45, 12);
    MockBackend mock(2);
    AugmentOptions serial, parallel;
    serial.concurrency = 1;
    parallel.concurrency = 7;
    const auto a = augment(train, AugmentStrategy::CombinedQA, mock, serial);
    const auto b = augment(train, AugmentStrategy::CombinedQA, mock, parallel);
    CHECK(render_augmented_jsonl(a.records) == render_augmented_jsonl(b.records));
    CHECK(a.summary_json() == b.summary_json());
}

TEST_CASE("cache makes reruns free and records provenance") {
    const auto dir = scratch_dir("cache");
    const auto train = synthesize_pubmedqa(25, 6);
    auto counting = std::make_shared<CountingBackend>(std::make_shared<MockBackend>(4));
    CachingBackend cached(counting, dir);

    const auto first = augment(train, AugmentStrategy::CombinedQA, cached);
    CHECK(counting->calls() == 50);
    const auto second = augment(train, AugmentStrategy::CombinedQA, cached);
    CHECK(counting->calls() == 50);
    CHECK(render_augmented_jsonl(first.records) == render_augmented_jsonl(second.records));

    for (const auto& a : first.records) {
        const auto path = cached.path_for(a.request_hash);
        REQUIRE(fs::exists(path));
        const auto entry = nlohmann::json::parse(slurp(path));
        const auto req = GenerationRequest::from_canonical(entry.at("request").dump());
        CHECK(req.hash() == a.request_hash);
        CHECK(parse_generation(entry.at("response").get<std::string>()).question == a.record.question);
    }

    // A tampered entry is reported instead of silently trusted.
    const auto victim = cached.path_for(first.records.front().request_hash);
    std::ofstream(victim) << "{not json";
    CHECK_THROWS_AS(augment(train, AugmentStrategy::CombinedQA, cached), Error);
    fs::remove_all(dir);
}

TEST_CASE("identical concurrent requests reach the inner backend once") {
    const auto dir = scratch_dir("inflight");
    auto slow = std::make_shared<ScriptedBackend>([](const GenerationRequest&) {
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        return std::string("QUESTION: q?\nCONTEXT: c\nLONG_ANSWER: a\nDECISION: yes\n");
    });
    auto counting = std::make_shared<CountingBackend>(slow);
    CachingBackend cached(counting, dir);
    const GenerationRequest req{"same", "m", 0.0, 8};
    std::vector<std::thread> pool;
    for (int i = 0; i < 6; ++i) pool.emplace_back([&] { cached.generate(req); });
    for (auto& t : pool) t.join();
    CHECK(counting->calls() == 1);
    fs::remove_all(dir);
}

TEST_CASE("bad generations are counted, not fatal") {
    const auto train = synthesize_pubmedqa(30, 13);
    MockBackend mock(0);
    std::atomic<int> n{0};
    ScriptedBackend flaky([&](const GenerationRequest& r) -> std::string {
        const std::string text = mock.generate(r);
        const auto h = r.hash();
        if (h[0] < '4') return "I cannot help with that.";
        if (h[0] < '8') {
            // Flip the decision.
            auto f = parse_generation(text);
            f.decision = static_cast<Label>((static_cast<int>(f.decision) + 1) % 3);
            return render_generation(f);
        }
        if (h[0] == '8') throw Error(ErrorKind::Parse, "malformed chat completion response");
        ++n;
        return text;
    });
    const auto result = augment(train, AugmentStrategy::RewriteQA, flaky);
    const auto& s = result.stats[0];
    CHECK(s.requests == 30);
    CHECK(s.parse_failures == s.failures.size());
    CHECK(s.parse_failures > 0);
    CHECK(s.label_mismatches > 0);
    CHECK(s.kept + s.parse_failures + s.label_mismatches + s.dedup_drops == 30);
    CHECK(s.kept + s.dedup_drops == static_cast<std::size_t>(n.load()));
    for (const auto& f : s.failures) CHECK(f.index < 30);
}

TEST_CASE("transport failure aborts with a resumable progress manifest") {
    const auto dir = scratch_dir("transport");
    const auto train = synthesize_pubmedqa(20, 14);
    auto mock = std::make_shared<MockBackend>(1);
    std::atomic<bool> down{true};
    auto outage = std::make_shared<ScriptedBackend>([&](const GenerationRequest& r) -> std::string {
        if (down && r.prompt.find("Request number 7.") != std::string::npos) throw Error(ErrorKind::Transport, "HTTP 503");
        return mock->generate(r);
    });
    auto counting = std::make_shared<CountingBackend>(outage);
    CachingBackend cached(counting, dir / "cache");
    AugmentOptions o;
    o.concurrency = 1;
    o.progress_path = dir / "progress.json";
    try {
        augment(train, AugmentStrategy::NewQA, cached, o);
        FAIL("expected a transport error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Transport);
    }
    const auto progress = nlohmann::json::parse(slurp(dir / "progress.json"));
    CHECK(progress.at("strategy") == "newQA");
    CHECK(progress.at("completed").size() == 6);
    CHECK(progress.at("pending").size() == 14);
    for (const auto& h : progress.at("completed")) CHECK(fs::exists(cached.path_for(h.get<std::string>())));

    down = false;
    const std::size_t before = counting->calls();
    const auto resumed = augment(train, AugmentStrategy::NewQA, cached, o);
    CHECK(counting->calls() - before == 14);
    MockBackend direct(1);
    CHECK(render_augmented_jsonl(resumed.records) ==
          render_augmented_jsonl(augment(train, AugmentStrategy::NewQA, direct, o).records));
    fs::remove_all(dir);
}

TEST_CASE("augmented jsonl round-trip") {
    MockBackend mock(9);
    const auto result = augment(synthesize_pubmedqa(15, 1), AugmentStrategy::CombinedQA, mock);
    const std::string text = render_augmented_jsonl(result.records);
    CHECK(parse_augmented_jsonl(text) == result.records);
    CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(result.records.size()));
    CHECK_THROWS_AS(parse_augmented_jsonl("{\"id\": 1}\n"), Error);
}

TEST_CASE("augment preconditions") {
    MockBackend mock;
    CHECK_THROWS_AS(augment({}, AugmentStrategy::RewriteQA, mock), Error);
    AugmentOptions o;
    o.n_per_source = 0;
    const auto train = synthesize_pubmedqa(3, 1);
    CHECK_THROWS_AS(augment(train, AugmentStrategy::RewriteQA, mock, o), Error);
}

TEST_CASE("remote chat client speaks the completion protocol") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::mutex mu;
    std::string seen_auth, seen_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        {
            std::lock_guard lock(mu);
            seen_auth = req.get_header_value("Authorization");
            seen_body = req.body;
        }
        if (n == 1) {
            res.status = 429;
            res.set_content("{\"error\": \"slow down\"}", "application/json");
            return;
        }
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json reply;
        reply["choices"] = nlohmann::json::array(
            {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", "echo: " + body["messages"][0]["content"].get<std::string>()}}}}});
        res.set_content(reply.dump(), "application/json");
    });
    server.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 400;
    });
    server.Post("/down/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 503;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread listener([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    ::setenv("PQFT_TEST_KEY", "sk-test", 1);
    RemoteSettings settings;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
    settings.api_key_env = "PQFT_TEST_KEY";
    settings.initial_backoff = std::chrono::milliseconds(1);
    settings.timeout = std::chrono::seconds(5);
    RemoteChatBackend remote(settings);

    const GenerationRequest req{"tell me", "gpt-3.5-turbo", 0.7, 128};
    CHECK(remote.generate(req) == "echo: tell me");
    CHECK(hits == 2);
    {
        std::lock_guard lock(mu);
        CHECK(seen_auth == "Bearer sk-test");
        const auto body = nlohmann::json::parse(seen_body);
        CHECK(body.at("model") == "gpt-3.5-turbo");
        CHECK(body.at("messages").size() == 1);
        CHECK(body.at("messages")[0].at("role") == "user");
        CHECK(body.at("temperature").get<double>() == doctest::Approx(0.7));
        CHECK(body.at("max_tokens") == 128);
    }

    hits = 0;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
    try {
        RemoteChatBackend(settings).generate(req);
        FAIL("expected a transport error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Transport);
    }
    CHECK(hits == 1);

    hits = 0;
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/down";
    CHECK_THROWS_AS(RemoteChatBackend(settings).generate(req), Error);
    CHECK(hits == 4);

    server.stop();
    listener.join();

    // Nobody listening: retried, then a transport error.
    settings.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
    settings.timeout = std::chrono::seconds(1);
    try {
        RemoteChatBackend(settings).generate(req);
        FAIL("expected a transport error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Transport);
    }
    CHECK_THROWS_AS(RemoteChatBackend::reply_text("{\"choices\": []}"), Error);
    CHECK_THROWS_AS(RemoteChatBackend(RemoteSettings{"no-scheme"}), Error);
}
