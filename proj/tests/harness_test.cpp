#include <doctest.h>

#include <sstream>

#include "tiermem/errors.hpp"
#include "tiermem/harness.hpp"
#include "tiermem/store_io.hpp"
#include "test_util.hpp"

using namespace tiermem;
using namespace tiermem::testing;

namespace {

MemoryStore fresh_store(const Embedder& embedder) {
    MemoryStore store;
    store.embedding_dim = embedder.dim();
    return store;
}

ToyTask simple_task() {
    ToyTask task;
    task.family = "f1";
    task.name = "t0";
    task.query = "put the widget on the shelf";
    task.answer = "widget placed";
    return task;
}

MockChatProvider chain_script() {
    return MockChatProvider({
        {{"Role: solver"}, "plan: place the widget"},
        {{"Role: critic", "- solver: plan: place the widget"}, "approve the plan"},
        {{"Role: executor", "- critic: approve the plan"}, "widget placed"},
    });
}

}  // namespace

TEST_CASE("Harness: topology validation") {
    CHECK_NOTHROW(validate_topology(default_topology()));

    MasTopology topo = default_topology();
    SUBCASE("duplicate agent ids") {
        topo.agents.push_back(topo.agents[0]);
        CHECK_THROWS_AS(validate_topology(topo), ConfigError);
    }
    SUBCASE("dangling edge") {
        topo.edges.emplace_back("solver", "ghost");
        CHECK_THROWS_AS(validate_topology(topo), ConfigError);
    }
    SUBCASE("cycle") {
        topo.edges.emplace_back(topo.agents.back().agent_id, topo.agents.front().agent_id);
        CHECK_THROWS_AS(validate_topology(topo), ConfigError);
    }
    SUBCASE("zero epochs") {
        topo.epochs = 0;
        CHECK_THROWS_AS(validate_topology(topo), ConfigError);
    }
}

TEST_CASE("Harness: a three-agent chain leaves a linear trace") {
    FallbackEmbedder embedder;
    const MemoryStore store = fresh_store(embedder);
    MockChatProvider mock = chain_script();
    HarnessConfig config;

    const EpisodeRecord ep =
        run_episode(default_topology(), store, embedder, mock, config, simple_task());

    CHECK(ep.query_text == "put the widget on the shelf");
    CHECK(ep.status == QueryStatus::Resolved);
    CHECK(ep.final_answer == "widget placed");
    REQUIRE(ep.trace.size() == 3);
    CHECK(ep.trace[0].role_label == "solver");
    CHECK(ep.trace[1].role_label == "critic");
    CHECK(ep.trace[2].role_label == "executor");
    CHECK(ep.trace[0].parents.empty());
    CHECK(ep.trace[1].parents == std::vector<std::size_t>{0});
    CHECK(ep.trace[2].parents == std::vector<std::size_t>{1});
    CHECK(ep.trace[0].epoch == 0);
    CHECK(ep.token_usage > 0);
    CHECK(mock.unmatched_count() == 0);

    const InteractionGraph g = build_interaction_graph(ep.trace);
    CHECK(g.nodes.size() == 3);
    CHECK(g.edge_count() == 2);
}

TEST_CASE("Harness: two epochs double the trace and wire across rounds") {
    FallbackEmbedder embedder;
    const MemoryStore store = fresh_store(embedder);
    MockChatProvider mock({
        {{"Role: solver"}, "plan it"},
        {{"Role: critic"}, "approve it"},
        {{"Role: executor"}, "widget placed"},
    });
    MasTopology topo = default_topology();
    topo.epochs = 2;
    HarnessConfig config;

    const EpisodeRecord ep =
        run_episode(topo, store, embedder, mock, config, simple_task());

    REQUIRE(ep.trace.size() == 6);
    for (int i = 0; i < 3; ++i) CHECK(ep.trace[i].epoch == 0);
    for (int i = 3; i < 6; ++i) CHECK(ep.trace[i].epoch == 1);
    // second-round solver hears the first-round solver
    const auto& solver_again = ep.trace[3];
    CHECK(solver_again.role_label == "solver");
    CHECK_FALSE(solver_again.parents.empty());
    CHECK(std::find(solver_again.parents.begin(), solver_again.parents.end(), 0) !=
          solver_again.parents.end());
    CHECK(validate_interaction_graph(build_interaction_graph(ep.trace)).empty());
}

TEST_CASE("Harness: the agent prompt carries role, task, inputs, and memory") {
    FallbackEmbedder embedder;
    MemoryStore store = fresh_store(embedder);
    MockChatProvider mock = chain_script();
    HarnessConfig config;

    run_episode(default_topology(), store, embedder, mock, config, simple_task());
    const auto transcript = mock.transcript();
    REQUIRE(transcript.size() == 3);

    const std::string& solver_user = transcript[0].request.user;
    CHECK(solver_user.find("Role: solver") != std::string::npos);
    CHECK(solver_user.find("Current task: put the widget on the shelf") != std::string::npos);
    CHECK(solver_user.find("(none)") != std::string::npos);  // no teammates, no memory yet

    const std::string& critic_user = transcript[1].request.user;
    CHECK(critic_user.find("- solver: plan: place the widget") != std::string::npos);

    const std::string& solver_system = transcript[0].request.system;
    CHECK(solver_system.find("solver") != std::string::npos);
}

TEST_CASE("Harness: memory cues only help once a success is on record") {
    FallbackEmbedder embedder;
    MemoryStore store = fresh_store(embedder);
    // the solver only finds the answer when a memory insight is present
    MockChatProvider mock({
        {{"Role: solver", "Memory insights:\n1."}, "plan: place the widget"},
        {{"Role: solver"}, "plan: flail"},
        {{"Role: critic", "place the widget"}, "approve the plan"},
        {{"Role: critic"}, "reject"},
        {{"Role: executor", "approve the plan"}, "widget placed"},
        {{"Role: executor"}, "give up"},
        {{"## Here is the task:"}, "1. u0\n2. u1\n3. u2"},
        {{"Success Case:"}, "Score: 9"},
        {{"## Successful trajectorys"}, "1. Place widgets directly."},
        {{"### Agent's Role:"}, "1. Place widgets directly."},
    });
    HarnessConfig config;

    // first attempt fails: no memory to retrieve
    RunReport report = run_suite(default_topology(), store, embedder, mock, config,
                                 {simple_task(), simple_task()});
    REQUIRE(report.outcomes.size() == 2);
    CHECK(report.outcomes[0].status == QueryStatus::Failed);
    // still failed: the failed episode generated no insight to retrieve
    CHECK(report.outcomes[1].status == QueryStatus::Failed);
    CHECK(store.query_graph.nodes.size() == 2);
    CHECK(store.insight_graph.nodes.empty());

    // seed one success by hand, then memory unlocks the solver
    MemoryStore seeded = fresh_store(embedder);
    InteractionGraph g;
    for (int i = 0; i < 2; ++i) {
        Utterance u;
        u.id = "u" + std::to_string(i);
        u.agent_id = i == 0 ? "solver" : "executor";
        u.role_label = u.agent_id;
        u.content = i == 0 ? "plan: place the widget" : "widget placed";
        if (i == 1) u.parents = {"u0"};
        g.nodes.push_back(u);
    }
    add_query_node(seeded, "put the widget on the shelf", QueryStatus::Resolved, g,
                   embedder.embed("put the widget on the shelf"));
    add_insight_node(seeded, "Place widgets directly.", {"q0"});

    mock.clear_transcript();
    RunReport second = run_suite(default_topology(), seeded, embedder, mock, config,
                                 {simple_task()});
    CHECK(second.outcomes[0].status == QueryStatus::Resolved);
    CHECK(second.outcomes[0].used_insights == 1);
    CHECK(second.outcomes[0].top_m == 1);
}

TEST_CASE("Harness: disabled memory never touches retrieval or insights") {
    FallbackEmbedder embedder;
    MemoryStore store = fresh_store(embedder);
    add_query_node(store, "put the widget on the shelf", QueryStatus::Resolved,
                   InteractionGraph{}, embedder.embed("put the widget on the shelf"));
    add_insight_node(store, "a perfectly good insight", {"q0"});

    MockChatProvider mock = chain_script();
    HarnessConfig config;
    config.memory_enabled = false;

    const RunReport report = run_suite(default_topology(), store, embedder, mock, config,
                                       {simple_task()});
    CHECK(report.outcomes[0].sketched == 0);
    CHECK(report.outcomes[0].used_insights == 0);
    // the store gained the query but no new insight
    CHECK(store.query_graph.nodes.size() == 2);
    CHECK(store.insight_graph.nodes.size() == 1);
    for (const auto& ex : mock.transcript()) {
        CHECK(ex.request.user.find("Memory insights:\n1.") == std::string::npos);
    }
}

TEST_CASE("Harness: an empty script fails every task but still commits queries") {
    FallbackEmbedder embedder;
    MemoryStore store = fresh_store(embedder);
    MockChatProvider mock;  // no rules: every reply is the unmatched default
    HarnessConfig config;

    std::vector<ToyTask> tasks;
    for (int i = 0; i < 20; ++i) {
        ToyTask t = simple_task();
        t.name = "t" + std::to_string(i);
        tasks.push_back(t);
    }
    const RunReport report =
        run_suite(default_topology(), store, embedder, mock, config, tasks);
    REQUIRE(report.outcomes.size() == 20);
    for (const auto& o : report.outcomes) CHECK(o.status == QueryStatus::Failed);
    CHECK(report.cumulative_success.back() == doctest::Approx(0.0));
    CHECK(store.query_graph.nodes.size() == 20);
    for (const auto& [id, node] : store.query_graph.nodes) {
        CHECK(node.status == QueryStatus::Failed);
    }
    CHECK(store.insight_graph.nodes.empty());
    CHECK(mock.unmatched_count() > 0);
}

TEST_CASE("Harness: majority aggregation with a tie falls to the last agent") {
    FallbackEmbedder embedder;
    const MemoryStore store = fresh_store(embedder);
    MasTopology topo;
    topo.agents = {{"a1", "solver"}, {"a2", "critic"}, {"a3", "executor"}, {"a4", "closer"}};
    topo.edges = {{"a1", "a2"}, {"a1", "a3"}, {"a1", "a4"}};
    topo.aggregator = Aggregator::Majority;
    HarnessConfig config;

    SUBCASE("clear majority wins") {
        MockChatProvider mock({
            {{"Role: solver"}, "seed"},
            {{"Role: critic"}, "widget placed"},
            {{"Role: executor"}, "widget placed"},
            {{"Role: closer"}, "dissent"},
        });
        const EpisodeRecord ep =
            run_episode(topo, store, embedder, mock, config, simple_task());
        CHECK(ep.final_answer == "widget placed");
        CHECK(ep.status == QueryStatus::Resolved);
    }

    SUBCASE("a two-vote answer beats a later single vote") {
        MockChatProvider mock({
            {{"Role: solver"}, "seed"},
            {{"Role: critic"}, "alpha"},
            {{"Role: executor"}, "alpha"},
            {{"Role: closer"}, "widget placed"},
        });
        const EpisodeRecord ep =
            run_episode(topo, store, embedder, mock, config, simple_task());
        CHECK(ep.final_answer == "alpha");
        CHECK(ep.status == QueryStatus::Failed);
    }

    SUBCASE("a full tie falls to the earliest agent in execution order") {
        MockChatProvider mock({
            {{"Role: solver"}, "seed"},
            {{"Role: critic"}, "alpha"},
            {{"Role: executor"}, "beta"},
            {{"Role: closer"}, "widget placed"},
        });
        const EpisodeRecord ep =
            run_episode(topo, store, embedder, mock, config, simple_task());
        CHECK(ep.final_answer == "seed");
        CHECK(ep.status == QueryStatus::Failed);
    }
}

TEST_CASE("Harness: reports serialize to CSV") {
    SUBCASE("empty report is just the header") {
        CHECK(report_to_csv({}) ==
              "task_index,family,status,tokens,cumulative_success_rate\n");
    }
    SUBCASE("rates carry four decimals and rows are 0-indexed") {
        RunReport report;
        TaskOutcome first;
        first.task_name = "t0";
        first.family = "f1";
        first.status = QueryStatus::Resolved;
        first.tokens = 455;
        TaskOutcome second = first;
        second.task_name = "t1";
        second.family = "f2";
        second.status = QueryStatus::Failed;
        second.tokens = 185;
        report.outcomes = {first, second};
        report.cumulative_success = {1.0, 0.5};
        const std::string csv = report_to_csv(report);
        std::istringstream lines(csv);
        std::string line;
        std::getline(lines, line);
        CHECK(line == "task_index,family,status,tokens,cumulative_success_rate");
        std::getline(lines, line);
        CHECK(line == "0,f1,Resolved,455,1.0000");
        std::getline(lines, line);
        CHECK(line == "1,f2,Failed,185,0.5000");
        CHECK_FALSE(std::getline(lines, line));
    }
}

TEST_CASE("Harness: suite files parse into tasks and script rules") {
    const TaskSuite suite = load_suite(data_dir() / "suite_learning.json");
    CHECK(suite.families.size() == 5);
    CHECK(suite.tasks.size() == 20);
    CHECK(suite.script.size() == 34);
    CHECK(suite.tasks[0].family == "f1");
    CHECK(suite.tasks[0].discoverable);
    CHECK_FALSE(suite.tasks[5].discoverable);
    // instances cycle through the families round-robin
    CHECK(suite.tasks[1].family == "f2");
    CHECK(suite.tasks[5].family == "f1");

    SUBCASE("unknown family is rejected") {
        const std::string text = R"({
            "families": ["f1"],
            "instances": [{"family": "f9", "name": "x", "query": "q", "answer": "a"}],
            "scripts": []
        })";
        CHECK_THROWS_AS(suite_from_json_text(text), ParseError);
    }
    SUBCASE("malformed json is a parse error") {
        CHECK_THROWS_AS(suite_from_json_text("{oops"), ParseError);
    }
    SUBCASE("missing file is not found") {
        CHECK_THROWS_AS(load_suite(data_dir() / "no_such_suite.json"), NotFoundError);
    }
}

TEST_CASE("Harness: the learning suite improves success once memory is on") {
    FallbackEmbedder embedder;
    const TaskSuite suite = load_suite(data_dir() / "suite_learning.json");
    HarnessConfig config;

    MemoryStore with_memory = fresh_store(embedder);
    MockChatProvider mock_on(suite.script);
    const RunReport on = run_suite(default_topology(), with_memory, embedder, mock_on,
                                   config, suite.tasks);

    MemoryStore without_memory = fresh_store(embedder);
    MockChatProvider mock_off(suite.script);
    HarnessConfig off_config = config;
    off_config.memory_enabled = false;
    const RunReport off = run_suite(default_topology(), without_memory, embedder,
                                    mock_off, off_config, suite.tasks);

    CHECK(on.cumulative_success.back() == doctest::Approx(1.0));
    CHECK(off.cumulative_success.back() == doctest::Approx(0.25));
    CHECK(on.cumulative_success.back() - off.cumulative_success.back() >=
          doctest::Approx(0.30));
    CHECK(mock_on.unmatched_count() == 0);
    CHECK(with_memory.insight_graph.nodes.size() > 0);
}

TEST_CASE("Harness: suite runs are deterministic end to end") {
    FallbackEmbedder embedder;
    const TaskSuite suite = load_suite(data_dir() / "suite_learning.json");
    HarnessConfig config;

    MemoryStore store_a = fresh_store(embedder);
    MockChatProvider mock_a(suite.script);
    const RunReport a =
        run_suite(default_topology(), store_a, embedder, mock_a, config, suite.tasks);

    MemoryStore store_b = fresh_store(embedder);
    MockChatProvider mock_b(suite.script);
    const RunReport b =
        run_suite(default_topology(), store_b, embedder, mock_b, config, suite.tasks);

    CHECK(report_to_csv(a) == report_to_csv(b));
    CHECK(store_to_json(store_a) == store_to_json(store_b));
    CHECK(a.total_tokens == b.total_tokens);
}

TEST_CASE("Harness: per-task token accounting matches the provider ledger") {
    FallbackEmbedder embedder;
    const TaskSuite suite = load_suite(data_dir() / "suite_learning.json");
    MemoryStore store = fresh_store(embedder);
    MockChatProvider mock(suite.script);
    const auto ledger = std::make_shared<TokenLedger>();
    mock.attach_ledger(ledger);
    HarnessConfig config;

    const RunReport report =
        run_suite(default_topology(), store, embedder, mock, config, suite.tasks);
    CHECK(report.total_tokens == ledger->total_tokens());

    std::size_t summed = 0;
    for (const auto& o : report.outcomes) summed += o.tokens;
    CHECK(summed == report.total_tokens);
}
