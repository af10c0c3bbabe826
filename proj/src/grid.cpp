#include "dtse/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <unordered_map>

#include "dtse/error.hpp"

namespace dtse::grid {

char phase_letter(int phase) {
    if (phase < 0 || phase >= kMaxPhases) fail(ErrorCode::InvalidArgument, "phase index out of range");
    return static_cast<char>('a' + phase);
}

int phase_index(char letter) {
    switch (letter) {
        case 'a': case 'A': return 0;
        case 'b': case 'B': return 1;
        case 'c': case 'C': return 2;
        default: break;
    }
    fail(ErrorCode::InvalidArgument, std::string("unknown phase '") + letter + "'");
}

std::size_t FeederModel::depth() const {
    std::size_t d = 0;
    for (const auto& b : buses_) d = std::max(d, b.depth);
    return d;
}

std::optional<std::size_t> FeederModel::bus_index(std::string_view id) const {
    for (std::size_t i = 0; i < buses_.size(); ++i)
        if (buses_[i].id == id) return i;
    return std::nullopt;
}

std::optional<std::size_t> FeederModel::node_index(std::size_t bus, int phase) const {
    if (bus >= node_of_.size() || phase < 0 || phase >= kMaxPhases) return std::nullopt;
    int n = node_of_[bus][static_cast<std::size_t>(phase)];
    if (n < 0) return std::nullopt;
    return static_cast<std::size_t>(n);
}

std::string FeederModel::node_label(std::size_t node) const {
    const auto& pn = nodes_.at(node);
    return buses_[pn.bus].id + ":" + phase_letter(pn.phase);
}

LoadScenario FeederModel::zero_loads() const { return LoadScenario{std::vector<Complex>(nodes_.size())}; }

namespace {

// Union-find for cycle detection.
struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    bool unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        parent[b] = a;
        return true;
    }
};

Eigen::MatrixXcd restrict(const Eigen::Matrix3cd& full, const std::vector<int>& phases) {
    const auto k = static_cast<Eigen::Index>(phases.size());
    Eigen::MatrixXcd out(k, k);
    for (Eigen::Index r = 0; r < k; ++r)
        for (Eigen::Index c = 0; c < k; ++c) out(r, c) = full(phases[r], phases[c]);
    return out;
}

bool is_finite(Complex c) { return std::isfinite(c.real()) && std::isfinite(c.imag()); }

}  // namespace

FeederModel build_feeder(const FeederSpec& spec) {
    FeederModel m;
    m.name_ = spec.name;
    m.base_kv_ = spec.base_kv;
    m.base_kva_ = spec.base_kva;
    if (spec.buses.empty()) fail(ErrorCode::InvalidArgument, "feeder has no buses");

    std::unordered_map<std::string, std::size_t> index;
    for (const auto& b : spec.buses) {
        if (!index.emplace(b.id, m.buses_.size()).second) fail(ErrorCode::DuplicateId, "bus '" + b.id + "'");
        Bus bus;
        bus.id = b.id;
        bus.phases = b.phases;
        std::sort(bus.phases.begin(), bus.phases.end());
        if (bus.phases.empty() || std::adjacent_find(bus.phases.begin(), bus.phases.end()) != bus.phases.end() ||
            bus.phases.front() < 0 || bus.phases.back() >= kMaxPhases)
            fail(ErrorCode::InvalidArgument, "bus '" + b.id + "' has an invalid phase set");
        m.buses_.push_back(std::move(bus));
    }
    auto lookup = [&](const std::string& id) {
        auto it = index.find(id);
        if (it == index.end()) fail(ErrorCode::UnknownBus, "'" + id + "'");
        return it->second;
    };
    m.slack_ = lookup(spec.slack_bus);
    for (int p : m.buses_[m.slack_].phases) {
        const double mag = std::abs(spec.slack_voltage[static_cast<std::size_t>(p)]);
        if (!(mag > 0.0) || !std::isfinite(mag))
            fail(ErrorCode::InvalidArgument, "slack voltage magnitude must be positive");
    }
    m.slack_voltage_ = spec.slack_voltage;

    const std::size_t nb = m.buses_.size();
    DisjointSets sets(nb);
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adjacency(nb);  // (neighbor, spec line)
    for (std::size_t l = 0; l < spec.lines.size(); ++l) {
        const auto& ls = spec.lines[l];
        const std::size_t a = lookup(ls.from);
        const std::size_t b = lookup(ls.to);
        if (a == b || !sets.unite(a, b))
            fail(ErrorCode::CycleDetected, "line " + ls.from + " -> " + ls.to + " closes a loop");
        adjacency[a].emplace_back(b, l);
        adjacency[b].emplace_back(a, l);
    }

    // Orient lines away from the slack.
    std::vector<bool> seen(nb, false);
    std::queue<std::size_t> frontier;
    frontier.push(m.slack_);
    seen[m.slack_] = true;
    m.children_.assign(nb, {});
    while (!frontier.empty()) {
        const std::size_t u = frontier.front();
        frontier.pop();
        m.order_.push_back(u);
        for (auto [v, l] : adjacency[u]) {
            if (seen[v]) continue;
            seen[v] = true;
            const auto& child = m.buses_[v];
            const auto& parent = m.buses_[u];
            for (int p : child.phases)
                if (std::find(parent.phases.begin(), parent.phases.end(), p) == parent.phases.end())
                    fail(ErrorCode::InvalidArgument,
                         "bus '" + child.id + "' has phase " + phase_letter(p) + " not present upstream");
            Line line;
            line.from = u;
            line.to = v;
            line.phases = child.phases;
            line.impedance = restrict(spec.lines[l].impedance, line.phases);
            Eigen::FullPivLU<Eigen::MatrixXcd> lu(line.impedance);
            if (!line.impedance.allFinite() || !lu.isInvertible())
                fail(ErrorCode::SingularImpedance, "line " + parent.id + " -> " + child.id);
            // phase impedance matrices are symmetric; keep the inverse exactly so
            const Eigen::MatrixXcd inv = lu.inverse();
            line.admittance = 0.5 * (inv + inv.transpose());
            m.buses_[v].parent_line = m.lines_.size();
            m.buses_[v].depth = parent.depth + 1;
            m.children_[u].push_back(m.lines_.size());
            m.lines_.push_back(std::move(line));
            frontier.push(v);
        }
    }
    for (std::size_t b = 0; b < nb; ++b)
        if (!seen[b]) fail(ErrorCode::DisconnectedBus, "'" + m.buses_[b].id + "' is not reachable from the slack");

    m.node_of_.assign(nb, {-1, -1, -1});
    for (std::size_t b = 0; b < nb; ++b) {
        for (int p : m.buses_[b].phases) {
            m.node_of_[b][static_cast<std::size_t>(p)] = static_cast<int>(m.nodes_.size());
            if (b != m.slack_) m.state_nodes_.push_back(m.nodes_.size());
            m.nodes_.push_back(PhaseNode{b, p});
        }
    }

    m.nominal_ = m.zero_loads();
    for (const auto& ld : spec.nominal_loads) {
        const std::size_t b = lookup(ld.bus);
        auto node = m.node_index(b, ld.phase);
        if (!node) fail(ErrorCode::InvalidLoad, "load on inactive phase " + ld.bus + ":" + phase_letter(ld.phase));
        if (b == m.slack_) fail(ErrorCode::InvalidLoad, "load placed on the slack bus");
        if (!is_finite(ld.power)) fail(ErrorCode::InvalidLoad, "non-finite load at " + ld.bus);
        m.nominal_.demand[*node] += ld.power;
    }
    return m;
}

FeederModel load_feeder(const std::string& path) { return build_feeder(load_feeder_spec(path)); }

std::vector<Complex> injected_currents(const FeederModel& feeder, const std::vector<Complex>& voltage) {
    if (voltage.size() != feeder.phase_nodes().size())
        fail(ErrorCode::LengthMismatch, "voltage vector does not cover the phase-nodes");
    std::vector<Complex> current(voltage.size());
    const auto k_of = [](const Line& l) { return static_cast<Eigen::Index>(l.phases.size()); };
    for (const auto& line : feeder.lines()) {
        const Eigen::Index k = k_of(line);
        Eigen::VectorXcd drop(k);
        for (Eigen::Index r = 0; r < k; ++r)
            drop(r) = voltage[*feeder.node_index(line.from, line.phases[r])] -
                      voltage[*feeder.node_index(line.to, line.phases[r])];
        const Eigen::VectorXcd flow = line.admittance * drop;  // from -> to
        for (Eigen::Index r = 0; r < k; ++r) {
            current[*feeder.node_index(line.from, line.phases[r])] += flow(r);
            current[*feeder.node_index(line.to, line.phases[r])] -= flow(r);
        }
    }
    return current;
}

std::vector<Complex> injected_power(const FeederModel& feeder, const std::vector<Complex>& voltage) {
    auto current = injected_currents(feeder, voltage);
    for (std::size_t i = 0; i < current.size(); ++i) current[i] = voltage[i] * std::conj(current[i]);
    return current;
}

VoltageSolution solve_power_flow(const FeederModel& feeder, const LoadScenario& loads, double tol, int max_iter) {
    const auto& nodes = feeder.phase_nodes();
    if (!(tol > 0.0)) fail(ErrorCode::InvalidArgument, "tolerance must be positive");
    if (max_iter < 1) fail(ErrorCode::InvalidArgument, "max_iter must be at least 1");
    if (loads.demand.size() != nodes.size())
        fail(ErrorCode::InvalidLoad, "load scenario does not match the feeder phase-nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (!is_finite(loads.demand[i])) fail(ErrorCode::InvalidLoad, "non-finite load at " + feeder.node_label(i));
        if (feeder.is_slack_node(i) && loads.demand[i] != Complex{})
            fail(ErrorCode::InvalidLoad, "load placed on the slack bus");
    }

    VoltageSolution sol;
    sol.voltage.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i)
        sol.voltage[i] = feeder.slack_voltage()[static_cast<std::size_t>(nodes[i].phase)];

    const auto& order = feeder.sweep_order();
    const auto& lines = feeder.lines();
    std::vector<Eigen::VectorXcd> flow(lines.size());
    std::vector<Complex> specified(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) specified[i] = -loads.demand[i];

    for (int iter = 1; iter <= max_iter; ++iter) {
        // backward: aggregate downstream currents
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            const std::size_t b = *it;
            const auto& bus = feeder.buses()[b];
            if (!bus.parent_line) continue;
            const auto& line = lines[*bus.parent_line];
            Eigen::VectorXcd total(static_cast<Eigen::Index>(line.phases.size()));
            for (std::size_t r = 0; r < line.phases.size(); ++r) {
                const std::size_t node = *feeder.node_index(b, line.phases[r]);
                total(static_cast<Eigen::Index>(r)) = std::conj(loads.demand[node] / sol.voltage[node]);
            }
            for (std::size_t child : feeder.child_lines(b)) {
                const auto& cl = lines[child];
                for (std::size_t r = 0; r < cl.phases.size(); ++r) {
                    auto pos = std::find(line.phases.begin(), line.phases.end(), cl.phases[r]) - line.phases.begin();
                    total(pos) += flow[child](static_cast<Eigen::Index>(r));
                }
            }
            flow[*bus.parent_line] = std::move(total);
        }
        // forward: voltage drops from the slack outward
        for (std::size_t b : order) {
            const auto& bus = feeder.buses()[b];
            if (!bus.parent_line) continue;
            const auto& line = lines[*bus.parent_line];
            const Eigen::VectorXcd drop = line.impedance * flow[*bus.parent_line];
            for (std::size_t r = 0; r < line.phases.size(); ++r) {
                const int p = line.phases[r];
                sol.voltage[*feeder.node_index(b, p)] =
                    sol.voltage[*feeder.node_index(line.from, p)] - drop(static_cast<Eigen::Index>(r));
            }
        }

        const auto injected = injected_power(feeder, sol.voltage);
        double mismatch = 0.0;
        bool finite = true;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (feeder.is_slack_node(i)) continue;
            if (!is_finite(sol.voltage[i]) || sol.voltage[i] == Complex{}) finite = false;
            mismatch = std::max(mismatch, std::abs(injected[i] - specified[i]));
        }
        sol.iterations = iter;
        sol.mismatch = mismatch;
        if (!finite || !std::isfinite(mismatch))
            fail(ErrorCode::NoConvergence, "sweep diverged at iteration " + std::to_string(iter));
        if (mismatch <= tol) return sol;
    }
    fail(ErrorCode::NoConvergence, "mismatch " + std::to_string(sol.mismatch) + " after " +
                                       std::to_string(max_iter) + " sweeps");
}

Eigen::MatrixXcd admittance_matrix(const FeederModel& feeder) {
    const auto n = static_cast<Eigen::Index>(feeder.phase_nodes().size());
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
    for (const auto& line : feeder.lines()) {
        const auto k = line.phases.size();
        for (std::size_t r = 0; r < k; ++r) {
            const auto fr = static_cast<Eigen::Index>(*feeder.node_index(line.from, line.phases[r]));
            const auto tr = static_cast<Eigen::Index>(*feeder.node_index(line.to, line.phases[r]));
            for (std::size_t c = 0; c < k; ++c) {
                const auto fc = static_cast<Eigen::Index>(*feeder.node_index(line.from, line.phases[c]));
                const auto tc = static_cast<Eigen::Index>(*feeder.node_index(line.to, line.phases[c]));
                const Complex yl = line.admittance(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
                y(fr, fc) += yl;
                y(tr, tc) += yl;
                y(fr, tc) -= yl;
                y(tr, fc) -= yl;
            }
        }
    }
    return y;
}

}  // namespace dtse::grid
