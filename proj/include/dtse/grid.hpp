#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace dtse::grid {

using Complex = std::complex<double>;

inline constexpr int kMaxPhases = 3;

/// Phase letter ('a', 'b', 'c') for a phase index 0..2.
char phase_letter(int phase);
/// Phase index for 'a'/'b'/'c' (case-insensitive); throws InvalidArgument otherwise.
int phase_index(char letter);

struct BusSpec {
    std::string id;
    std::vector<int> phases;  // subset of {0,1,2}
};

struct LineSpec {
    std::string from;
    std::string to;
    Eigen::Matrix3cd impedance;  // full 3x3 per-unit, restricted to the downstream bus phases
};

struct LoadSpec {
    std::string bus;
    int phase = 0;
    Complex power;  // demand, p.u., positive = consumption
};

/// Unvalidated feeder description, as read from a fixture file.
struct FeederSpec {
    int format_version = 1;
    std::string name;
    std::vector<BusSpec> buses;
    std::vector<LineSpec> lines;
    std::string slack_bus;
    std::array<Complex, kMaxPhases> slack_voltage{};
    double base_kv = 1.0;
    double base_kva = 1.0;
    std::vector<LoadSpec> nominal_loads;
};

FeederSpec parse_feeder_spec(std::string_view text);
FeederSpec load_feeder_spec(const std::string& path);
std::string dump_feeder_spec(const FeederSpec& spec);

struct PhaseNode {
    std::size_t bus = 0;
    int phase = 0;
};

struct Bus {
    std::string id;
    std::vector<int> phases;
    std::optional<std::size_t> parent_line;  // empty for the slack
    std::size_t depth = 0;
};

/// A line oriented away from the slack. Matrices are restricted to `phases`.
struct Line {
    std::size_t from = 0;
    std::size_t to = 0;
    std::vector<int> phases;
    Eigen::MatrixXcd impedance;
    Eigen::MatrixXcd admittance;
};

/// Per phase-node complex demand (p.u.), aligned with FeederModel::phase_nodes().
struct LoadScenario {
    std::vector<Complex> demand;
};

struct VoltageSolution {
    std::vector<Complex> voltage;  // per phase-node
    int iterations = 0;
    double mismatch = 0.0;  // max |S_injected - S_specified| over non-slack phase-nodes
};

/// Validated radial three-phase feeder. Immutable after construction.
class FeederModel {
  public:
    const std::string& name() const { return name_; }
    const std::vector<Bus>& buses() const { return buses_; }
    const std::vector<Line>& lines() const { return lines_; }
    std::size_t slack() const { return slack_; }
    const std::array<Complex, kMaxPhases>& slack_voltage() const { return slack_voltage_; }
    double base_kv() const { return base_kv_; }
    double base_kva() const { return base_kva_; }

    /// Buses in breadth-first order from the slack (slack first).
    const std::vector<std::size_t>& sweep_order() const { return order_; }
    std::size_t depth() const;
    /// Lines leaving `bus` downstream.
    const std::vector<std::size_t>& child_lines(std::size_t bus) const { return children_[bus]; }

    /// All active phase-nodes, ordered by bus then phase.
    const std::vector<PhaseNode>& phase_nodes() const { return nodes_; }
    /// Indices into phase_nodes() of the non-slack phase-nodes (the estimated states).
    const std::vector<std::size_t>& state_nodes() const { return state_nodes_; }
    std::size_t state_dim() const { return 2 * state_nodes_.size(); }

    std::optional<std::size_t> bus_index(std::string_view id) const;
    std::optional<std::size_t> node_index(std::size_t bus, int phase) const;
    bool is_slack_node(std::size_t node) const { return nodes_[node].bus == slack_; }
    std::string node_label(std::size_t node) const;  // "bus:phase"

    const LoadScenario& nominal_loads() const { return nominal_; }
    LoadScenario zero_loads() const;

  private:
    friend FeederModel build_feeder(const FeederSpec& spec);
    FeederModel() = default;

    std::string name_;
    std::vector<Bus> buses_;
    std::vector<Line> lines_;
    std::size_t slack_ = 0;
    std::array<Complex, kMaxPhases> slack_voltage_{};
    double base_kv_ = 1.0;
    double base_kva_ = 1.0;
    std::vector<std::size_t> order_;
    std::vector<PhaseNode> nodes_;
    std::vector<std::size_t> state_nodes_;
    std::vector<std::array<int, kMaxPhases>> node_of_;  // per bus, per phase, -1 if inactive
    std::vector<std::vector<std::size_t>> children_;    // child line indices per bus
    LoadScenario nominal_;
};

/// Validates the description. Errors: CycleDetected, DisconnectedBus, DuplicateId,
/// SingularImpedance, UnknownBus, InvalidArgument.
FeederModel build_feeder(const FeederSpec& spec);
FeederModel load_feeder(const std::string& path);

/// Backward/forward sweep for constant-power wye loads.
/// Errors: NoConvergence, InvalidLoad.
VoltageSolution solve_power_flow(const FeederModel& feeder, const LoadScenario& loads, double tol = 1e-8,
                                 int max_iter = 100);

/// Dense nodal admittance matrix over phase_nodes().
Eigen::MatrixXcd admittance_matrix(const FeederModel& feeder);

/// Y·v computed line by line.
std::vector<Complex> injected_currents(const FeederModel& feeder, const std::vector<Complex>& voltage);

/// v ⊙ conj(Y·v): complex power injected at every phase-node.
std::vector<Complex> injected_power(const FeederModel& feeder, const std::vector<Complex>& voltage);

}  // namespace dtse::grid
