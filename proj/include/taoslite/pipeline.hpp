#pragma once

#include "taoslite/builder.hpp"
#include "taoslite/config.hpp"
#include "taoslite/modulator.hpp"
#include "taoslite/types.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace taoslite {

struct PhaseReport {
    Phase phase = Phase::Format;
    std::vector<PluginResult> results;  // execution order
    bool passed = true;                 // Fail iff any blocking (Base/Good) result fails
    std::int64_t duration_ms = 0;
};

struct JobReport {
    JobId job_id = 0;
    PhaseReport format;
    std::vector<BuildOutcome> builds;
    std::optional<PhaseReport> audit;
    bool final_pass = false;
    std::vector<std::string> notes;
    int builder_invocations = 0;
};

nlohmann::json to_json(const PhaseReport& report);
nlohmann::json to_json(const JobReport& report);

/// Observation points for metrics and tests; all optional.
struct PipelineHooks {
    std::function<void(JobId, const std::string& plugin, std::int64_t duration_ms)>
        on_plugin_timing;
};

bool is_blocking_failure(const PluginResult& r);

PhaseReport run_phase(const ExecutionPlan& plan, PluginContext& ctx,
                      JobControl* control = nullptr, const PipelineHooks* hooks = nullptr,
                      JobId job = 0);

JobReport aggregate(JobId job, PhaseReport format, std::vector<BuildOutcome> builds,
                    std::optional<PhaseReport> audit, std::vector<std::string> notes);

/// Full per-job sequence: allocate -> merge -> shared context -> format ->
/// (short-circuit) -> builds -> (short-circuit) -> audit -> aggregate -> release.
JobReport execute_job(JobId job, const CommitEvent& event, const ExecutionPlan& plan,
                      const EngineConfig& config, JobControl* control = nullptr,
                      const PipelineHooks* hooks = nullptr);

}  // namespace taoslite
