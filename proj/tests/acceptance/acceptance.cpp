#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "taoslite/engine.hpp"
#include "taoslite/metrics.hpp"
#include "taoslite/pipeline.hpp"

#include "support/fixtures.hpp"
#include "support/mock_codehost.hpp"

#include <httplib.h>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <signal.h>
#include <thread>

using namespace taoslite;
using namespace taoslite::test;
using namespace std::chrono_literals;

namespace {

/// Prints one PASS/FAIL line per criterion. Assertions inside a criterion
/// must be REQUIRE-style so a failure unwinds through the destructor.
class Criterion {
public:
    Criterion(int number, std::string title) : number_(number), title_(std::move(title)) {
        start_ = Clock::now();
    }
    ~Criterion() {
        bool failed = std::uncaught_exceptions() > 0;
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_)
                      .count();
        std::cout << (failed ? "[FAIL]" : "[PASS]") << " criterion " << number_ << ": "
                  << title_ << " (" << ms << " ms)" << std::endl;
    }

private:
    int number_;
    std::string title_;
    Clock::time_point start_;
};

// post_terminal runs after the scheduler marks the job terminal, so the mock
// transcript can lag wait_idle() by a beat.
template <typename Pred>
bool eventually(Pred pred, std::chrono::milliseconds budget = 5s) {
    auto deadline = Clock::now() + budget;
    while (Clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(20ms);
    }
    return pred();
}

CommitEvent synthetic_event(std::int64_t change_id) {
    CommitEvent ev;
    ev.repo = "org/app";
    ev.change_id = change_id;
    ev.head_sha = std::string(40, 'a');
    ev.received_at = Clock::now();
    return ev;
}

// Criterion 1 records these; criterion 7 asserts on them.
struct StressObservations {
    bool ran = false;
    long idle_res_before = 0;
    long idle_res_after = 0;
    int base_threads = 0;
    int worst_thread_margin = 0;  // max over runs of (observed - budget); <= 0 is good
};
StressObservations g_stress;

struct EngineHarness {
    TempDir tmp{"taoslite-acc"};
    FixtureRepo repo;
    EngineConfig config;
    std::filesystem::path config_path;
    int script_counter = 0;

    EngineHarness() {
        std::filesystem::create_directories(tmp.path() / "ws");
        repo = make_fixture_repo(tmp.path() / "repos");
        config.listen_port = 0;
        config.webhook_secret = "acc-secret";
        config.workspace_root = tmp.path() / "ws";
        config.repo_root = tmp.path() / "repos";
        config.max_run_queue = 2;
        config_path = tmp.path() / "engine.conf";
    }

    std::filesystem::path script(const std::string& body) {
        return write_script(tmp.path() / ("s" + std::to_string(script_counter++) + ".sh"),
                            body);
    }

    PluginEntry plugin(const std::string& name, PluginGroup group, Phase phase,
                       const std::string& body, int timeout_sec = 30) {
        return {.name = name,
                .group = group,
                .phase = phase,
                .command = script(body).string(),
                .timeout_sec = timeout_sec};
    }

    int post_event(Engine& engine, std::int64_t change_id) {
        httplib::Client client("127.0.0.1", engine.http_port());
        std::string body = pull_request_payload(repo, change_id);
        httplib::Headers headers{
            {"X-Event-Kind", "pull_request"},
            {"X-Signature-256", "sha256=" + hmac_sha256_hex(body, config.webhook_secret)}};
        auto res = client.Post("/webhook", headers, body, "application/json");
        return res ? res->status : -1;
    }
};

}  // namespace

TEST_CASE("criterion 1+7: scheduler stress") {
    {
        Criterion c(1, "scheduler FIFO order and run-queue bound under randomized stress");

        MetricsRecorder recorder;
        recorder.start_ticker(20ms);
        std::this_thread::sleep_for(100ms);
        auto before = sample_self();
        REQUIRE(before.res_kb.has_value());
        g_stress.idle_res_before = *before.res_kb;
        g_stress.base_threads = before.threads;

        std::mt19937 rng(20250824);
        for (int max_run : {1, 2, 4, 8}) {
            struct Shared {
                std::mutex mutex;
                std::vector<JobId> started;
                Scheduler* sched = nullptr;
                std::mt19937 rng{7};
            };
            auto shared = std::make_shared<Shared>();
            Scheduler sched(max_run, [shared](const Job& job) {
                int sleep_ms;
                {
                    std::lock_guard lock(shared->mutex);
                    shared->started.push_back(job.id);
                    sleep_ms = 10 + static_cast<int>(shared->rng() % 41);
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(sleep_ms));
                shared->sched->complete(job.id, JobState::Succeeded, nullptr);
            });
            shared->sched = &sched;

            size_t before_samples = recorder.samples().size();
            std::vector<JobId> submitted;
            for (int i = 0; i < 250; ++i) {
                submitted.push_back(sched.submit(synthetic_event(i + 1)));
                auto snap = sched.snapshot();
                REQUIRE(snap.running.size() <= static_cast<size_t>(max_run));
                if (rng() % 8 == 0) std::this_thread::sleep_for(1ms);
            }
            while (true) {
                auto snap = sched.snapshot();
                REQUIRE(snap.running.size() <= static_cast<size_t>(max_run));
                if (snap.waiting.empty() && snap.running.empty()) break;
                std::this_thread::sleep_for(2ms);
            }
            sched.wait_idle();

            // FIFO start order: all change ids distinct, so start order must
            // equal submission order (the enqueue-sequence oracle).
            std::vector<JobId> started;
            {
                std::lock_guard lock(shared->mutex);
                started = shared->started;
            }
            REQUIRE(started == submitted);

            int budget = g_stress.base_threads + max_run + 2;
            auto samples = recorder.samples();
            for (size_t i = before_samples; i < samples.size(); ++i) {
                g_stress.worst_thread_margin =
                    std::max(g_stress.worst_thread_margin, samples[i].threads - budget);
            }
            sched.shutdown(1s);
        }

        recorder.stop_ticker();
        std::this_thread::sleep_for(200ms);
        auto after = sample_self();
        REQUIRE(after.res_kb.has_value());
        g_stress.idle_res_after = *after.res_kb;
        g_stress.ran = true;
    }

    {
        Criterion c(7, "thread and memory thrift during the stress run");
        REQUIRE(g_stress.ran);
        // Thread count never exceeded base + max_run_queue + 2.
        REQUIRE(g_stress.worst_thread_margin <= 0);
        // Idle RES after the run stays within 2x idle RES before.
        REQUIRE(g_stress.idle_res_after <= 2 * g_stress.idle_res_before);
    }
}

TEST_CASE("criterion 2: victim maker kills the stale duplicate's plugin process") {
    Criterion c(2, "victim maker kills running duplicate, child process gone within grace");

    EngineHarness hx;
    auto pid_file = hx.tmp.path() / "victim.pid";
    auto first_flag = hx.tmp.path() / "first.flag";
    // First invocation records its pid and blocks; later invocations pass fast.
    hx.config.plugins.push_back(hx.plugin(
        "blocker", PluginGroup::Base, Phase::Format,
        "if [ -f " + first_flag.string() + " ]; then exit 0; fi\n"
        "touch " + first_flag.string() + "\n"
        "echo $$ > " + pid_file.string() + "\n"
        "sleep 60",
        120));
    Engine engine(hx.config);
    engine.start();

    REQUIRE(hx.post_event(engine, 5) == 202);
    auto deadline = Clock::now() + 10s;
    while (!std::filesystem::exists(pid_file)) {
        REQUIRE(Clock::now() < deadline);
        std::this_thread::sleep_for(10ms);
    }
    pid_t plugin_pid = 0;
    {
        std::ifstream f(pid_file);
        f >> plugin_pid;
    }
    REQUIRE(plugin_pid > 0);
    REQUIRE(engine.scheduler().find(1)->state == JobState::Running);

    // Same change id again: the older running job becomes the victim.
    REQUIRE(hx.post_event(engine, 5) == 202);
    deadline = Clock::now() + 2s;
    while (engine.scheduler().find(1)->state != JobState::Killed) {
        REQUIRE(Clock::now() < deadline);
        std::this_thread::sleep_for(10ms);
    }

    // The plugin child must be gone within the 5 s grace period.
    auto grace_deadline = Clock::now() + 5s;
    bool gone = false;
    while (!gone && Clock::now() < grace_deadline) {
        gone = ::kill(plugin_pid, 0) != 0;
        if (!gone) std::this_thread::sleep_for(20ms);
    }
    REQUIRE(gone);

    engine.scheduler().wait_idle();
    REQUIRE(engine.scheduler().find(2)->state == JobState::Succeeded);
    engine.stop(1s);
}

TEST_CASE("criterion 3: format failure short-circuits the builder") {
    Criterion c(3, "failing Base format plugin stops before any builder invocation");

    EngineHarness hx;
    MockCodeHost host;
    hx.config.reporter = {.base_url = host.url(), .backoff_ms = 10};
    hx.config.plugins.push_back(
        hx.plugin("strict", PluginGroup::Base, Phase::Format, "exit 1"));
    auto build_marker = hx.tmp.path() / "built.marker";
    hx.config.profiles.push_back(
        {.name = "debian-like",
         .packaging_script = "hello.c",
         .build_command = hx.script("touch " + build_marker.string()).string()});
    Engine engine(hx.config);
    engine.start();

    REQUIRE(hx.post_event(engine, 1) == 202);
    engine.scheduler().wait_idle();

    auto job = engine.scheduler().find(1);
    REQUIRE(job.has_value());
    REQUIRE(job->state == JobState::Failed);
    REQUIRE(job->report);
    REQUIRE(job->report->builder_invocations == 0);
    REQUIRE(job->report->builds.empty());
    REQUIRE(!job->report->audit.has_value());
    REQUIRE(!std::filesystem::exists(build_marker));

    auto saw_skipped = [&] {
        for (const auto& s : host.statuses("taos/build"))
            if (s.state == "error" && s.description.find("skipped") != std::string::npos)
                return true;
        return false;
    };
    REQUIRE(eventually(saw_skipped));
    engine.stop(1s);
}

TEST_CASE("criterion 4: Base -> Good -> Staging ordering in both phases") {
    Criterion c(4, "group ordering holds across 50 randomized config orders, both phases");

    EngineHarness hx;
    auto handle = allocate(hx.config.workspace_root, 1);
    auto ctx_base = compute_shared_context(1, handle, synthetic_event(1), {});
    auto noop = hx.script("exit 0").string();

    auto rank = [](PluginGroup g) {
        return g == PluginGroup::Base ? 0 : g == PluginGroup::Good ? 1 : 2;
    };

    std::mt19937 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<PluginEntry> plugins;
        for (Phase phase : {Phase::Format, Phase::Audit}) {
            for (int g = 0; g < 3; ++g) {
                for (int i = 0; i < 4; ++i) {
                    plugins.push_back({.name = std::string(to_string(phase)) + "-g" +
                                               std::to_string(g) + "-" + std::to_string(i),
                                       .group = static_cast<PluginGroup>(g),
                                       .phase = phase,
                                       .command = noop,
                                       .timeout_sec = 10});
                }
            }
        }
        std::shuffle(plugins.begin(), plugins.end(), rng);
        auto plan = build_plan(plugins);
        REQUIRE(plan.format_order.size() == 12);
        REQUIRE(plan.audit_order.size() == 12);

        for (Phase phase : {Phase::Format, Phase::Audit}) {
            auto ctx = ctx_base;
            ctx.phase = phase;
            auto report = run_phase(plan, ctx);
            REQUIRE(report.results.size() == 12);
            // Recorded execution trace: groups never go backwards.
            for (size_t i = 1; i < report.results.size(); ++i) {
                REQUIRE(rank(report.results[i - 1].group) <= rank(report.results[i].group));
            }
            for (const auto& r : report.results) REQUIRE(r.verdict == Verdict::Pass);
        }
    }
    release(handle, JobState::Succeeded, false);
}

TEST_CASE("criterion 5: module-maintenance delta replay against a live engine") {
    Criterion c(5, "12 reloads replay the +12,-2,... sequence; final job runs 7 plugins");

    EngineHarness hx;

    // Pool of distinct plugin scripts; the config file is rewritten before
    // every reload with the currently active set.
    std::vector<std::string> active;
    int next_id = 0;
    auto noop = hx.script("exit 0").string();
    auto write_config = [&] {
        std::ofstream f(hx.config_path);
        f << "listen = 127.0.0.1:0\n"
          << "webhook_secret = acc-secret\n"
          << "workspace_root = " << hx.config.workspace_root.string() << "\n"
          << "repo_root = " << hx.config.repo_root.string() << "\n"
          << "max_run_queue = 2\n";
        for (const auto& name : active)
            f << "[plugin " << name << "]\ngroup = base\nphase = format\ncommand = " << noop
              << "\n";
    };

    write_config();  // zero plugins at start
    Engine engine(load_config(hx.config_path), hx.config_path);
    engine.start();
    auto socket = control_socket_path(*engine.config());
    REQUIRE(engine.plan()->size() == 0);

    const std::vector<int> deltas{12, -2, 1, -1, -1, -1, 2, -1, -1, -1, 1, -1};
    const std::vector<std::size_t> expected_trace{12, 10, 11, 10, 9, 8, 10, 9, 8, 7, 8, 7};
    std::vector<std::size_t> trace;
    for (int d : deltas) {
        if (d > 0)
            for (int i = 0; i < d; ++i) active.push_back("mod" + std::to_string(next_id++));
        else
            for (int i = 0; i < -d; ++i) active.pop_back();
        write_config();
        auto response = control_request(socket, {{"cmd", "reload"}});
        REQUIRE(response["ok"] == true);
        trace.push_back(response["active_plugins"].get<std::size_t>());
    }
    REQUIRE(trace == expected_trace);

    // A job dispatched after step 12 runs exactly the 7 remaining plugins.
    REQUIRE(hx.post_event(engine, 1) == 202);
    engine.scheduler().wait_idle();
    auto job = engine.scheduler().find(1);
    REQUIRE(job.has_value());
    REQUIRE(job->report);
    REQUIRE(job->report->format.results.size() == 7);
    std::vector<std::string> ran;
    for (const auto& r : job->report->format.results) ran.push_back(r.plugin);
    auto expected = active;
    std::sort(ran.begin(), ran.end());
    std::sort(expected.begin(), expected.end());
    REQUIRE(ran == expected);
    engine.stop(1s);
}

TEST_CASE("criterion 6: shared vs naive context scaling trend") {
    Criterion c(6, "naive cost scales with module count; shared marginal cost is spawn-only");

    TempDir scratch("taoslite-acc-scaling");
    const int setup_ms = 200;

    auto p95 = calibrate_spawn_p95_ms(scratch.path(), 20);
    REQUIRE(p95 >= 1);

    std::vector<int> naive_ns{12};
    auto naive_rows = scaling_run(naive_ns, "naive", setup_ms, scratch.path() / "naive");
    REQUIRE(naive_rows.size() == 1);
    REQUIRE(naive_rows[0].total_ms >= 12 * setup_ms);

    std::vector<int> shared_ns{1, 12};
    auto shared_rows = scaling_run(shared_ns, "shared", setup_ms, scratch.path() / "shared");
    REQUIRE(shared_rows.size() == 2);
    auto marginal = shared_rows[1].total_ms - shared_rows[0].total_ms;
    auto budget = 11 * p95 * 125 / 100;  // 11 extra spawns + 25% slack
    INFO("marginal=", marginal, " budget=", budget, " p95=", p95);
    REQUIRE(marginal <= budget);
}

TEST_CASE("criterion 8: end-to-end golden path") {
    Criterion c(8, "replayed pull_request event builds and passes end to end");

    EngineHarness hx;
    MockCodeHost host;
    hx.config.reporter = {.base_url = host.url(), .backoff_ms = 10};
    hx.config.plugins.push_back(hx.plugin("fmt", PluginGroup::Base, Phase::Format, "exit 0"));
    hx.config.plugins.push_back(hx.plugin(
        "aud", PluginGroup::Base, Phase::Audit,
        "test -x \"$TAOS_ARTIFACT_DIR/debian-like/hello\""));
    hx.config.profiles.push_back(
        {.name = "debian-like",
         .packaging_script = "hello.c",
         .build_command = hx.script("cc -o \"$TAOS_ARTIFACT_DIR/hello\" hello.c").string()});
    Engine engine(hx.config);
    engine.start();

    REQUIRE(hx.post_event(engine, 9) == 202);
    engine.scheduler().wait_idle();

    auto job = engine.scheduler().find(1);
    REQUIRE(job.has_value());
    REQUIRE(job->state == JobState::Succeeded);
    REQUIRE(job->report);
    REQUIRE(job->report->final_pass);
    REQUIRE(job->report->builds.size() == 1);
    REQUIRE(job->report->builds[0].artifacts ==
            std::vector<std::string>{"out/debian-like/hello"});
    REQUIRE(job->report->audit.has_value());
    REQUIRE(job->report->audit->passed);

    // Transcript: exactly 4 pendings then 4 successes.
    REQUIRE(eventually([&] { return host.statuses().size() >= 8; }));
    auto statuses = host.statuses();
    REQUIRE(statuses.size() == 8);
    for (size_t i = 0; i < 4; ++i) REQUIRE(statuses[i].state == "pending");
    for (size_t i = 4; i < 8; ++i) REQUIRE(statuses[i].state == "success");
    engine.stop(1s);
}

TEST_CASE("criterion 9: signature gate") {
    Criterion c(9, "tampered payloads are rejected; HMAC verification round-trips");

    EngineHarness hx;
    Engine engine(hx.config);
    engine.start();

    std::string body = pull_request_payload(hx.repo, 1);
    std::string stale = hmac_sha256_hex(body, hx.config.webhook_secret);
    std::string tampered = body + " ";

    httplib::Client client("127.0.0.1", engine.http_port());
    httplib::Headers headers{{"X-Event-Kind", "pull_request"},
                             {"X-Signature-256", "sha256=" + stale}};
    auto res = client.Post("/webhook", headers, tampered, "application/json");
    REQUIRE(res);
    REQUIRE(res->status == 401);
    auto snap = engine.scheduler().snapshot();
    REQUIRE(snap.waiting.empty());
    REQUIRE(snap.running.empty());

    std::mt19937 rng(99);
    for (int i = 0; i < 1000; ++i) {
        std::string random_body(rng() % 128, '\0');
        for (auto& ch : random_body) ch = static_cast<char>(rng() % 256);
        std::string secret(1 + rng() % 40, '\0');
        for (auto& ch : secret) ch = static_cast<char>(rng() % 256);
        REQUIRE(verify_signature(random_body, hmac_sha256_hex(random_body, secret), secret));
    }
    engine.stop(1s);
}
