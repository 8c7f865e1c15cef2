#pragma once

#include "taoslite/config.hpp"
#include "taoslite/proc.hpp"
#include "taoslite/types.hpp"
#include "taoslite/workspace.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace taoslite {

enum class Verdict { Pass, Fail, Skipped, TimedOut, Crashed };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::Pass:     return "pass";
    case Verdict::Fail:     return "fail";
    case Verdict::Skipped:  return "skipped";
    case Verdict::TimedOut: return "timed_out";
    case Verdict::Crashed:  return "crashed";
    }
    return "?";
}

struct PluginMessage {
    std::string severity;  // error | warning | info
    std::string file;      // optional
    int line = 0;          // 0 = absent
    std::string text;
};

struct PluginResult {
    std::string plugin;
    PluginGroup group = PluginGroup::Base;
    Verdict verdict = Verdict::Crashed;
    int exit_code = -1;  // -1 = absent (timeout / spawn failure)
    std::int64_t duration_ms = 0;
    std::vector<PluginMessage> messages;
};

/// Enabled plugins ordered Base -> Good -> Staging per phase, config-file
/// order within a group. Immutable once built.
struct ExecutionPlan {
    std::uint64_t version = 0;
    std::vector<PluginEntry> format_order;
    std::vector<PluginEntry> audit_order;

    const std::vector<PluginEntry>& phase_order(Phase p) const {
        return p == Phase::Format ? format_order : audit_order;
    }
    std::size_t size() const { return format_order.size() + audit_order.size(); }
};

class PlanError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

ExecutionPlan build_plan(std::span<const PluginEntry> plugins, std::uint64_t version = 1);

ExecutionPlan plug_in(const ExecutionPlan& plan, const PluginEntry& entry);
ExecutionPlan plug_out(const ExecutionPlan& plan, const std::string& name);

/// Compute-once shared job context handed to every plugin.
struct PluginContext {
    WorkspaceHandle workspace;
    CommitEvent event;
    std::vector<std::string> changed_files;
    std::map<std::string, std::string> shared_values;
    Phase phase = Phase::Format;
    std::filesystem::path changed_files_path;  // newline-separated list, written once

    // Producer-name -> invocation count; observable so tests can assert the
    // compute-once property and the naive baseline.
    std::shared_ptr<std::map<std::string, int>> producer_counts;

    int setup_ms = 0;  // simulated shared setup cost, used by the scaling harness
};

PluginContext compute_shared_context(JobId job, const WorkspaceHandle& handle,
                                     const CommitEvent& event,
                                     std::vector<std::string> changed_files,
                                     int setup_ms = 0);

/// Re-runs every producer against an existing context. Test/metrics-only
/// baseline mode modelling a system without the shared modulator.
void rerun_producers_naive(PluginContext& ctx);

PluginResult run_plugin(const PluginEntry& entry, const PluginContext& ctx,
                        JobControl* control = nullptr);

}  // namespace taoslite
