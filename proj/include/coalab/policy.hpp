#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string_view>
#include <vector>

#include "coalab/env.hpp"
#include "coalab/neural.hpp"
#include "coalab/world.hpp"

namespace coalab {

enum class Algorithm { Maddpg, Mappo };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view name);

inline constexpr std::uint32_t kPolicySetVersion = 1;

/// Frozen actors for one vehicle kind. Actor outputs are normalized to
/// [-1, 1] per axis and scaled by max_speed. Vehicle i uses actor i mod N.
struct PolicySet {
    Algorithm algorithm = Algorithm::Maddpg;
    VehicleKind kind = VehicleKind::Ugv;
    ObservationLayout layout;
    double max_speed = 0.0;
    std::vector<Mlp> actors;

    [[nodiscard]] const Mlp& actor_for(std::size_t vehicle) const;
    /// Deterministic action, no exploration.
    [[nodiscard]] Action act(std::size_t vehicle, const Observation& obs) const;
};

/// Directory with actor_<i>.mlp files and a `policy.manifest` key/value file.
void save_policy_set(const PolicySet& set, const std::filesystem::path& dir);
PolicySet load_policy_set(const std::filesystem::path& dir);

/// Normalized actor output to a world action.
Action to_action(const Eigen::VectorXd& normalized, double max_speed);

struct CurveRow {
    std::size_t episode = 0;
    double episode_return = 0.0;  // sum over steps of the mean reward over agents
    std::array<double, 7> components{};  // same sum, per reward component
    int collisions = 0;
    int steps = 0;
};

/// Columns: episode,return,r1..r7,collisions,steps.
void write_learning_curve(const std::vector<CurveRow>& rows, const std::filesystem::path& path);
std::vector<CurveRow> read_learning_curve(const std::filesystem::path& path);

/// Mean episode return over rows [first, first + count).
double mean_return(const std::vector<CurveRow>& rows, std::size_t first, std::size_t count);

/// One team step, reported to optional training observers.
struct StepLog {
    std::size_t episode = 0;
    int step = 0;
    double team_reward = 0.0;
};

/// Optional training callbacks. on_checkpoint fires after every
/// checkpoint_every-th episode with the current actors.
struct TrainHooks {
    std::function<void(const StepLog&)> on_step;
    std::size_t checkpoint_every = 0;
    std::function<void(std::size_t episodes_done, const PolicySet&)> on_checkpoint;
};

/// Greedy rollouts of trained UGV actors, recorded as replayable trajectories.
DemoLog record_demos(UgvTrainingEnv& env, const PolicySet& policy, std::size_t episodes, std::uint64_t seed);

}  // namespace coalab
