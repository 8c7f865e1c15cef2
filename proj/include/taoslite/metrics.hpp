#pragma once

#include "taoslite/types.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace taoslite {

/// One VIRT/RES/SHR/threads observation of our own process. Absent memory
/// fields mean the platform's accounting does not expose them (absence != 0).
struct MemorySample {
    std::chrono::system_clock::time_point timestamp;
    std::optional<long> virt_kb;
    std::optional<long> res_kb;
    std::optional<long> shr_kb;
    int threads = 1;
};

MemorySample sample_self();

struct ScalingRow {
    int n_modules = 0;
    std::string mode;  // shared | naive
    std::int64_t total_ms = 0;
    double per_module_ms = 0.0;
};

struct TimingEntry {
    JobId job = 0;
    std::string plugin;
    std::int64_t duration_ms = 0;
};

class MetricsRecorder {
public:
    static constexpr size_t kTimingRingCapacity = 10000;

    void record_plugin_timing(JobId job, const std::string& plugin, std::int64_t duration_ms);
    void record_sample(const MemorySample& sample);
    void add_scaling_rows(const std::vector<ScalingRow>& rows);

    std::vector<TimingEntry> timings() const;
    std::vector<MemorySample> samples() const;

    /// Header `kind,timestamp,n_modules,mode,total_ms,virt_kb,res_kb,shr_kb,threads`.
    void export_csv(const std::filesystem::path& path) const;

    void start_ticker(std::chrono::milliseconds period = std::chrono::seconds(5));
    void stop_ticker();
    ~MetricsRecorder();

private:
    mutable std::mutex mutex_;
    std::deque<TimingEntry> timing_ring_;
    std::vector<MemorySample> samples_;
    std::vector<ScalingRow> scaling_rows_;

    std::thread ticker_;
    std::mutex ticker_mutex_;
    std::condition_variable ticker_cv_;
    bool ticker_stop_ = false;
};

/// Runs one synthetic job per n with n no-op plugins, under the shared or
/// naive context mode, with a simulated shared setup cost of setup_ms.
std::vector<ScalingRow> scaling_run(std::span<const int> n_values, const std::string& mode,
                                    int setup_ms, const std::filesystem::path& scratch);

/// p95 wall time of spawning the same no-op plugin the scaling harness uses.
std::int64_t calibrate_spawn_p95_ms(const std::filesystem::path& scratch, int samples = 20);

}  // namespace taoslite
