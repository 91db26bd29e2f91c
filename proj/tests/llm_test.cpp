#include <doctest.h>

#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "tiermem/errors.hpp"
#include "tiermem/llm.hpp"
#include "tiermem/prompts.hpp"
#include "test_util.hpp"

using namespace tiermem;
using namespace tiermem::testing;

TEST_CASE("Prompts: built-in templates match their fixture files byte for byte") {
    const auto& table = prompt_templates();
    REQUIRE(table.size() == 6);
    for (const char* name : {"relevance", "extract_trajectory", "lessons_compare",
                             "lessons_all_succ", "merge", "personalize"}) {
        CAPTURE(name);
        const PromptTemplate& t = get_prompt(name);
        CHECK(t.name == name);
        CHECK(t.system == read_file(data_dir() / "prompts" / (std::string(name) + ".system.txt")));
        CHECK(t.user == read_file(data_dir() / "prompts" / (std::string(name) + ".user.txt")));
    }
    CHECK_THROWS_AS(get_prompt("nope"), NotFoundError);
}

TEST_CASE("Prompts: templates are pairwise distinct") {
    const auto& table = prompt_templates();
    std::vector<std::string> users;
    for (const auto& [name, t] : table) users.push_back(t.user);
    std::sort(users.begin(), users.end());
    CHECK(std::adjacent_find(users.begin(), users.end()) == users.end());
}

TEST_CASE("Prompts: rendering fills placeholders and flags unbound ones") {
    SUBCASE("relevance render ends with the score cue") {
        const std::string text = render_template(
            get_prompt("relevance").user,
            {{"trajectory", "[solver] plan\n[executor] done"},
             {"query_scenario", "put a clean cloth in countertop"}});
        REQUIRE(text.size() >= 7);
        CHECK(text.substr(text.size() - 7) == "Score: ");
        CHECK(text.find("{trajectory}") == std::string::npos);
        CHECK(text.find("[solver] plan") != std::string::npos);
    }
    SUBCASE("merge render carries the numeric cap into the text") {
        const std::string text = render_template(
            get_prompt("merge").user,
            {{"current_rules", "1. a\n2. b"}, {"limited_number", "10"}});
        CHECK(text.find("no more than 10 refined insights") != std::string::npos);
    }
    SUBCASE("unbound placeholder throws and names the slot") {
        try {
            render_template(get_prompt("personalize").user,
                            {{"trajectory", "t"}, {"insights", "1. x"}});
            FAIL("expected DomainError");
        } catch (const DomainError& e) {
            CHECK(std::string(e.what()).find("role") != std::string::npos);
        }
    }
    SUBCASE("simple substitution") {
        CHECK(render_template("a {x} b {y}", {{"x", "1"}, {"y", "2"}}) == "a 1 b 2");
    }
    SUBCASE("repeated placeholder fills every occurrence") {
        CHECK(render_template("{x}+{x}", {{"x", "q"}}) == "q+q");
    }
    SUBCASE("non-identifier brace text passes through") {
        CHECK(render_template("set {1, 2} stays", {}) == "set {1, 2} stays");
    }
    SUBCASE("distinct bindings give distinct renders") {
        const std::string t = get_prompt("relevance").user;
        const std::string a = render_template(
            t, {{"trajectory", "x"}, {"query_scenario", "alpha"}});
        const std::string b = render_template(
            t, {{"trajectory", "x"}, {"query_scenario", "beta"}});
        CHECK(a != b);
    }
}

TEST_CASE("Prompts: score parsing finds the last score") {
    CHECK(parse_score("Score: 7") == 7);
    CHECK(parse_score("I'd say Score: 3 overall") == 3);
    CHECK(parse_score("Score: 2 ... wait, Score: 9") == 9);
    CHECK(parse_score("Score:\n8") == 8);
    CHECK(parse_score("Score: 11") == 11);  // clamping is the caller's job
    CHECK_THROWS_AS(parse_score("score: 5"), ParseError);  // marker is case-sensitive
    CHECK_THROWS_AS(parse_score("no rating here"), ParseError);
    CHECK_THROWS_AS(parse_score("Score: none"), ParseError);
    CHECK_THROWS_AS(parse_score(""), ParseError);
}

TEST_CASE("Prompts: numbered-list parsing") {
    CHECK(parse_numbered_list("1. Alpha\n2. Beta") ==
          std::vector<std::string>{"Alpha", "Beta"});
    CHECK(parse_numbered_list("2. B\n5. E") == std::vector<std::string>{"B", "E"});
    CHECK(parse_numbered_list("intro text\n1. Only item\ntrailing words") ==
          std::vector<std::string>{"Only item"});
    CHECK(parse_numbered_list("1.   padded   ") == std::vector<std::string>{"padded"});
    CHECK(parse_numbered_list("1. \n2. Real") == std::vector<std::string>{"Real"});
    CHECK(parse_numbered_list("plain prose, no list").empty());
    CHECK(parse_numbered_list("").empty());
}

TEST_CASE("Prompts: numbered-list parsing never throws (fuzz)") {
    std::mt19937_64 rng(555);
    const std::string alphabet = "abc123.\n :-()[]";
    std::uniform_int_distribution<std::size_t> len(0, 120);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (int round = 0; round < 500; ++round) {
        std::string text;
        const std::size_t n = len(rng);
        for (std::size_t i = 0; i < n; ++i) text.push_back(alphabet[pick(rng)]);
        CHECK_NOTHROW(parse_numbered_list(text));
    }
}

TEST_CASE("Prompts: proxy token count is ceil(bytes/4)") {
    CHECK(proxy_token_count("") == 0);
    CHECK(proxy_token_count("abcd") == 1);
    CHECK(proxy_token_count("abcdefgh") == 2);
    CHECK(proxy_token_count("abcdefghij") == 3);
    CHECK(proxy_token_count("x") == 1);
}

TEST_CASE("Mock chat: scripted rules fire deterministically") {
    MockChatProvider mock({
        {{"Role: solver", "family:f1"}, "plan: do-f1"},
        {{"Role: solver"}, "plan: explore"},
        {{}, "catch-all"},
    });

    SUBCASE("conjunction: every needle must appear") {
        const ChatResult r = mock.complete({"system text", "Role: solver\nfamily:f1 task"});
        CHECK(r.text == "plan: do-f1");
        CHECK(r.matched);
    }
    SUBCASE("first matching rule wins") {
        const ChatResult r = mock.complete({"system text", "Role: solver\nother family"});
        CHECK(r.text == "plan: explore");
    }
    SUBCASE("needles can live in the system text") {
        const ChatResult r = mock.complete({"Role: solver briefing", "unrelated"});
        CHECK(r.text == "plan: explore");
    }
    SUBCASE("empty needle list matches everything") {
        const ChatResult r = mock.complete({"s", "nothing recognizable"});
        CHECK(r.text == "catch-all");
        CHECK(r.matched);
    }
    SUBCASE("identical requests give identical results") {
        const ChatRequest req{"s", "Role: solver\nfamily:f1"};
        const ChatResult a = mock.complete(req);
        const ChatResult b = mock.complete(req);
        CHECK(a.text == b.text);
        CHECK(a.prompt_tokens == b.prompt_tokens);
        CHECK(a.completion_tokens == b.completion_tokens);
    }
}

TEST_CASE("Mock chat: unmatched calls are flagged and counted") {
    MockChatProvider mock(std::vector<MockRule>{{{"needle"}, "found"}});
    const ChatResult r = mock.complete({"sys", "no match here"});
    CHECK(r.text == MockChatProvider::kUnmatchedReply);
    CHECK_FALSE(r.matched);
    CHECK(mock.unmatched_count() == 1);
    mock.complete({"sys", "still nothing"});
    CHECK(mock.unmatched_count() == 2);
    REQUIRE(mock.transcript().size() == 2);
    CHECK_FALSE(mock.transcript()[0].matched);
    mock.clear_transcript();
    CHECK(mock.transcript().empty());
}

TEST_CASE("Mock chat: token usage is the byte proxy and lands on the ledger") {
    MockChatProvider mock(std::vector<MockRule>{{{"ping"}, "pong-blah"}});
    const auto ledger = std::make_shared<TokenLedger>();
    mock.attach_ledger(ledger);

    const ChatResult r = mock.complete({"sys!", "ping"});
    // prompt = "sys!" + "\n" + "ping" = 9 bytes -> 3; reply = 9 bytes -> 3
    CHECK(r.prompt_tokens == 3);
    CHECK(r.completion_tokens == 3);
    CHECK(ledger->prompt_tokens() == 3);
    CHECK(ledger->completion_tokens() == 3);
    CHECK(ledger->total_tokens() == 6);
    CHECK(ledger->calls() == 1);

    mock.complete({"sys!", "ping"});
    CHECK(ledger->total_tokens() == 12);
    CHECK(ledger->calls() == 2);

    ledger->reset();
    CHECK(ledger->total_tokens() == 0);
    CHECK(ledger->calls() == 0);
}

TEST_CASE("Ledger: records accumulate across threads") {
    TokenLedger ledger;
    std::vector<std::thread> workers;
    for (int t = 0; t < 4; ++t) {
        workers.emplace_back([&ledger] {
            for (int i = 0; i < 250; ++i) ledger.record(2, 1);
        });
    }
    for (auto& w : workers) w.join();
    CHECK(ledger.prompt_tokens() == 2000);
    CHECK(ledger.completion_tokens() == 1000);
    CHECK(ledger.calls() == 1000);
}

TEST_CASE("Remote chat: speaks the JSON chat protocol against a live server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string last_body;
    std::mutex body_mutex;

    server.Post("/v1/chat/completions", [&](const httplib::Request& req,
                                            httplib::Response& res) {
        ++hits;
        {
            std::lock_guard<std::mutex> lock(body_mutex);
            last_body = req.body;
        }
        nlohmann::json reply = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "Score: 8"}}}}}},
            {"usage", {{"prompt_tokens", 42}, {"completion_tokens", 5}}},
        };
        res.set_content(reply.dump(), "application/json");
    });

    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteChatConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(port);
    RemoteChatProvider remote(config);
    const auto ledger = std::make_shared<TokenLedger>();
    remote.attach_ledger(ledger);

    const ChatResult r = remote.complete({"be terse", "rate this"});
    CHECK(r.text == "Score: 8");
    CHECK(r.prompt_tokens == 42);
    CHECK(r.completion_tokens == 5);
    CHECK(hits.load() == 1);
    CHECK(ledger->total_tokens() == 47);

    {
        std::lock_guard<std::mutex> lock(body_mutex);
        const nlohmann::json sent = nlohmann::json::parse(last_body);
        REQUIRE(sent["messages"].size() == 2);
        CHECK(sent["messages"][0]["role"] == "system");
        CHECK(sent["messages"][0]["content"] == "be terse");
        CHECK(sent["messages"][1]["role"] == "user");
        CHECK(sent["messages"][1]["content"] == "rate this");
        CHECK(sent["model"] == "default");
    }

    server.stop();
    runner.join();
}

TEST_CASE("Remote chat: tolerates a bare content reply and proxies usage") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"content": "plain reply"})", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteChatConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(port);
    RemoteChatProvider remote(config);
    const ChatResult r = remote.complete({"sys", "user"});
    CHECK(r.text == "plain reply");
    // no usage block -> byte proxy: prompt "sys\nuser" = 8 bytes -> 2,
    // reply "plain reply" = 11 bytes -> 3
    CHECK(r.prompt_tokens == 2);
    CHECK(r.completion_tokens == 3);

    server.stop();
    runner.join();
}

TEST_CASE("Remote chat: retries then throws TransportError on persistent failure") {
    httplib::Server server;
    std::atomic<int> hits{0};
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 500;
        res.set_content("boom", "text/plain");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread runner([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    RemoteChatConfig config;
    config.endpoint = "http://127.0.0.1:" + std::to_string(port);
    config.max_retries = 2;
    RemoteChatProvider remote(config);
    CHECK_THROWS_AS(remote.complete({"s", "u"}), TransportError);
    CHECK(hits.load() == 3);  // first attempt + 2 retries

    server.stop();
    runner.join();
}

TEST_CASE("Remote chat: unreachable endpoint throws TransportError") {
    RemoteChatConfig config;
    config.endpoint = "http://127.0.0.1:1";  // nothing listens there
    config.max_retries = 0;
    config.timeout_seconds = 2;
    RemoteChatProvider remote(config);
    CHECK_THROWS_AS(remote.complete({"s", "u"}), TransportError);
}
