#include "taoslite/metrics.hpp"

#include "taoslite/modulator.hpp"
#include "taoslite/workspace.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <sys/stat.h>

namespace taoslite {

MemorySample sample_self() {
    MemorySample sample;
    sample.timestamp = std::chrono::system_clock::now();

    std::ifstream status("/proc/self/status");
    std::string line;
    long rss_anon = -1, rss_file = -1, rss_shmem = -1;
    while (std::getline(status, line)) {
        std::istringstream in(line);
        std::string key;
        long value = 0;
        in >> key >> value;
        if (key == "VmSize:") sample.virt_kb = value;
        else if (key == "VmRSS:") sample.res_kb = value;
        else if (key == "RssAnon:") rss_anon = value;
        else if (key == "RssFile:") rss_file = value;
        else if (key == "RssShmem:") rss_shmem = value;
        else if (key == "Threads:") sample.threads = static_cast<int>(value);
    }
    // SHR as top(1) reports it: resident file-backed plus shmem pages.
    if (rss_file >= 0 || rss_shmem >= 0)
        sample.shr_kb = std::max(rss_file, 0L) + std::max(rss_shmem, 0L);
    (void)rss_anon;
    return sample;
}

void MetricsRecorder::record_plugin_timing(JobId job, const std::string& plugin,
                                           std::int64_t duration_ms) {
    std::lock_guard lock(mutex_);
    timing_ring_.push_back({job, plugin, duration_ms});
    if (timing_ring_.size() > kTimingRingCapacity) timing_ring_.pop_front();
}

void MetricsRecorder::record_sample(const MemorySample& sample) {
    std::lock_guard lock(mutex_);
    samples_.push_back(sample);
}

void MetricsRecorder::add_scaling_rows(const std::vector<ScalingRow>& rows) {
    std::lock_guard lock(mutex_);
    scaling_rows_.insert(scaling_rows_.end(), rows.begin(), rows.end());
}

std::vector<TimingEntry> MetricsRecorder::timings() const {
    std::lock_guard lock(mutex_);
    return {timing_ring_.begin(), timing_ring_.end()};
}

std::vector<MemorySample> MetricsRecorder::samples() const {
    std::lock_guard lock(mutex_);
    return samples_;
}

void MetricsRecorder::export_csv(const std::filesystem::path& path) const {
    std::lock_guard lock(mutex_);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "kind,timestamp,n_modules,mode,total_ms,virt_kb,res_kb,shr_kb,threads\n";
    auto opt = [](const std::optional<long>& v) {
        return v ? std::to_string(*v) : std::string();
    };
    for (const auto& s : samples_) {
        auto ts = std::chrono::duration_cast<std::chrono::milliseconds>(
                      s.timestamp.time_since_epoch())
                      .count();
        out << "memory," << ts << ",,,," << opt(s.virt_kb) << "," << opt(s.res_kb) << ","
            << opt(s.shr_kb) << "," << s.threads << "\n";
    }
    for (const auto& r : scaling_rows_) {
        out << "scaling,," << r.n_modules << "," << r.mode << "," << r.total_ms
            << ",,,,\n";
    }
}

void MetricsRecorder::start_ticker(std::chrono::milliseconds period) {
    stop_ticker();
    {
        std::lock_guard lock(ticker_mutex_);
        ticker_stop_ = false;
    }
    ticker_ = std::thread([this, period] {
        std::unique_lock lock(ticker_mutex_);
        while (!ticker_stop_) {
            lock.unlock();
            record_sample(sample_self());
            lock.lock();
            ticker_cv_.wait_for(lock, period, [this] { return ticker_stop_; });
        }
    });
}

void MetricsRecorder::stop_ticker() {
    {
        std::lock_guard lock(ticker_mutex_);
        ticker_stop_ = true;
    }
    ticker_cv_.notify_all();
    if (ticker_.joinable()) ticker_.join();
}

MetricsRecorder::~MetricsRecorder() {
    stop_ticker();
}

namespace {

struct ScalingFixture {
    WorkspaceHandle handle;
    CommitEvent event;
    std::string plugin_command;
};

ScalingFixture make_fixture(const std::filesystem::path& scratch) {
    ScalingFixture fx;
    std::filesystem::create_directories(scratch);
    fx.handle = allocate(scratch, 999999);
    std::filesystem::path script = scratch / "noop-plugin.sh";
    {
        std::ofstream f(script);
        f << "#!/bin/sh\nexit 0\n";
    }
    ::chmod(script.c_str(), 0755);
    fx.plugin_command = script.string();
    fx.event.repo = "bench/bench";
    fx.event.change_id = 1;
    fx.event.head_sha = std::string(40, 'a');
    return fx;
}

}  // namespace

std::vector<ScalingRow> scaling_run(std::span<const int> n_values, const std::string& mode,
                                    int setup_ms, const std::filesystem::path& scratch) {
    auto fx = make_fixture(scratch);
    bool naive = mode == "naive";

    std::vector<ScalingRow> rows;
    for (int n : n_values) {
        std::vector<PluginEntry> entries;
        for (int i = 0; i < n; ++i) {
            entries.push_back({.name = "noop" + std::to_string(i),
                               .group = PluginGroup::Base,
                               .phase = Phase::Format,
                               .command = fx.plugin_command,
                               .timeout_sec = 30});
        }
        auto plan = build_plan(entries);

        auto start = Clock::now();
        auto ctx = compute_shared_context(0, fx.handle, fx.event, {}, setup_ms);
        ctx.phase = Phase::Format;
        bool first = true;
        for (const auto& entry : plan.format_order) {
            if (naive && !first) rerun_producers_naive(ctx);
            run_plugin(entry, ctx);
            first = false;
        }
        auto total_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            Clock::now() - start)
                            .count();

        ScalingRow row;
        row.n_modules = n;
        row.mode = naive ? "naive" : "shared";
        row.total_ms = total_ms;
        row.per_module_ms = n > 0 ? static_cast<double>(total_ms) / n : 0.0;
        rows.push_back(row);
    }
    std::error_code ec;
    std::filesystem::remove_all(fx.handle.job_dir, ec);
    return rows;
}

std::int64_t calibrate_spawn_p95_ms(const std::filesystem::path& scratch, int samples) {
    auto fx = make_fixture(scratch / "calibrate");
    PluginEntry entry{.name = "calibrate",
                      .group = PluginGroup::Base,
                      .phase = Phase::Format,
                      .command = fx.plugin_command,
                      .timeout_sec = 30};
    auto ctx = compute_shared_context(0, fx.handle, fx.event, {}, 0);
    ctx.phase = Phase::Format;

    std::vector<std::int64_t> costs;
    for (int i = 0; i < samples; ++i) {
        auto start = Clock::now();
        run_plugin(entry, ctx);
        costs.push_back(std::chrono::duration_cast<std::chrono::milliseconds>(
                            Clock::now() - start)
                            .count());
    }
    std::sort(costs.begin(), costs.end());
    size_t idx = std::min(costs.size() - 1, static_cast<size_t>(costs.size() * 95 / 100));
    std::int64_t p95 = costs[idx];
    std::error_code ec;
    std::filesystem::remove_all(fx.handle.job_dir, ec);
    return std::max<std::int64_t>(p95, 1);
}

}  // namespace taoslite
