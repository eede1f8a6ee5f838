#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coalab/episode.hpp"
#include "coalab/policy.hpp"

namespace coalab {

/// Sum of T_e over E. All metric functions throw std::invalid_argument on
/// an empty record list.
double completion_rate(std::span<const EpisodeRecord> records);

/// 1000 * sum(alpha + beta) / E.
double collisions_per_1k(std::span<const EpisodeRecord> records);

/// Mean phi over every episode.
double mean_steps(std::span<const EpisodeRecord> records);

/// Mean phi over completed episodes; NaN when none completed.
double mean_steps_completed(std::span<const EpisodeRecord> records);

/// 100 * sum(reached) / sum(total), pooled over targets. 100 when there are no targets.
double accuracy(std::span<const EpisodeRecord> records);

/// Sum phi / E.
double completion_time(std::span<const EpisodeRecord> records);

struct MetricRow {
    std::string method;
    std::string config;
    std::string metric;
    double value = 0.0;

    friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

/// The metric rows for one batch of episodes, in a fixed metric order.
std::vector<MetricRow> summarize(const std::string& method, const std::string& config,
                                 std::span<const EpisodeRecord> records);

/// CSV with header method,config,metric,value.
void write_metric_table(const std::vector<MetricRow>& rows, const std::filesystem::path& path);
std::vector<MetricRow> read_metric_table(const std::filesystem::path& path);

/// One row per episode: episode,phi,alpha,beta,completed,targets_total,targets_reached.
void write_episode_table(std::span<const EpisodeRecord> records, const std::filesystem::path& path);

/// Per-vehicle path log: step,entity_kind,entity_id,x,y,event where event is
/// launch or land on the step a UAV changes state.
std::string episode_log_csv(const EpisodeRecord& record);

/// Grouped bar chart: one group per config, one bar per method, for one metric.
std::string bar_chart_svg(const std::vector<MetricRow>& rows, const std::string& metric);

/// Learning curves, one polyline per named series, smoothed by a trailing window.
struct CurveSeries {
    std::string name;
    std::vector<CurveRow> rows;
};
std::string learning_curve_svg(const std::vector<CurveSeries>& series, std::size_t window);

}  // namespace coalab
