#include "dmp/hdd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dmp/error.hpp"

namespace dmp::hdd {

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::int64_t Rng::uniform(std::int64_t lo, std::int64_t hi) {
  const auto span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());  // full 64-bit range
  // 2^64 mod span; draws below it would bias the low residues.
  const std::uint64_t threshold = (0 - span) % span;
  while (true) {
    const std::uint64_t x = next();
    if (x >= threshold) return lo + static_cast<std::int64_t>(x % span);
  }
}

double Rng::unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void Constraints::validate() const {
  if (max_partitions_per_broker <= 0 || max_partitions_total_factor <= 0 || !(l_max_ms > 0)) {
    throw Error(Errc::InvalidConfig, "constraint bounds must be positive");
  }
}

Constraints Constraints::from_document(const Document& doc) {
  if (!doc.is_object()) throw Error(Errc::InvalidConfig, "constraints must be an object");
  Constraints c;
  c.max_partitions_per_broker = doc.value("max_partitions_per_broker", c.max_partitions_per_broker);
  c.max_partitions_total_factor =
      doc.value("max_partitions_total_factor", c.max_partitions_total_factor);
  c.l_max_ms = doc.value("l_max_ms", c.l_max_ms);
  c.validate();
  return c;
}

Document Constraints::to_document() const {
  return {{"max_partitions_per_broker", max_partitions_per_broker},
          {"max_partitions_total_factor", max_partitions_total_factor},
          {"l_max_ms", l_max_ms}};
}

std::string_view to_string(Algorithm algorithm) noexcept {
  switch (algorithm) {
    case Algorithm::MsCnfl: return "ms-cnfl";
    case Algorithm::BroMin: return "bro-min";
    case Algorithm::BroMax: return "bro-max";
  }
  return "bro-max";
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "ms-cnfl") return Algorithm::MsCnfl;
  if (text == "bro-min") return Algorithm::BroMin;
  if (text == "bro-max") return Algorithm::BroMax;
  throw Error(Errc::ConfigError, "unknown algorithm '" + std::string(text) + "'");
}

std::vector<std::int64_t> PartitionPlan::replicas_per_broker() const {
  std::vector<std::int64_t> load(std::max(brokers, 0), 0);
  if (brokers <= 0) return load;
  for (const int lead : assignment) {
    for (int j = 0; j < replication; ++j) ++load[(lead + j) % brokers];
  }
  return load;
}

std::int64_t PartitionPlan::open_handles(int handle_cost_per_replica) const {
  return partitions * replication * handle_cost_per_replica;
}

Document PartitionPlan::to_document() const {
  Document doc = {{"algorithm", to_string(algorithm)},
                  {"partitions", partitions},
                  {"brokers", brokers},
                  {"replication", replication},
                  {"predicted_latency_ms", predicted_latency_ms},
                  {"replicas_per_broker", replicas_per_broker()}};
  if (draw) doc["draw"] = {{"u1", draw->u1}, {"u2", draw->u2}};
  return doc;
}

std::int64_t round_robin_max_load(std::int64_t partitions, int brokers, int replication) {
  const std::int64_t full_rounds = partitions / brokers;
  const std::int64_t remainder = partitions % brokers;
  return replication * full_rounds + std::min<std::int64_t>(replication, remainder);
}

namespace {

bus::ClusterConfig with_shape(bus::ClusterConfig cfg, int brokers, int replication) {
  cfg.brokers = brokers;
  cfg.replication = replication;
  return cfg;
}

std::vector<int> round_robin_leads(std::int64_t partitions, int brokers) {
  std::vector<int> leads(static_cast<std::size_t>(partitions));
  for (std::int64_t i = 0; i < partitions; ++i) leads[i] = static_cast<int>(i % brokers);
  return leads;
}

// Exact feasibility of a round-robin plan; the searches below only use
// closed-form bounds to pick where to start scanning.
bool round_robin_feasible(std::int64_t partitions, int brokers, int replication,
                          const Constraints& c, const bus::ClusterConfig& cfg) {
  return round_robin_max_load(partitions, brokers, replication) <= c.max_partitions_per_broker &&
         partitions <= c.max_partitions_total_factor * brokers &&
         bus::replication_latency(cfg, partitions) <= c.l_max_ms;
}

PartitionPlan round_robin_plan(Algorithm algorithm, std::int64_t partitions, int brokers,
                               int replication, const bus::ClusterConfig& cfg) {
  PartitionPlan plan;
  plan.algorithm = algorithm;
  plan.partitions = partitions;
  plan.brokers = brokers;
  plan.replication = replication;
  plan.assignment = round_robin_leads(partitions, brokers);
  plan.predicted_latency_ms = bus::replication_latency(cfg, partitions);
  return plan;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

}  // namespace

PartitionPlan ms_cnfl(int brokers, int replication, Rng& rng,
                      const bus::ClusterConfig& calibration) {
  if (brokers < 1 || replication < 1) {
    throw Error(Errc::EmptyRange, "B and r must be >= 1");
  }
  const std::int64_t ms_bound = 1000LL * brokers / replication;
  if (ms_bound < 1) {
    throw Error(Errc::EmptyRange, "floor(1000*B/r) = 0 for B=" + std::to_string(brokers) +
                                      ", r=" + std::to_string(replication));
  }
  const std::int64_t cnfl_bound = 100LL * brokers;

  PartitionPlan plan;
  plan.algorithm = Algorithm::MsCnfl;
  plan.brokers = brokers;
  plan.replication = replication;
  MsCnflDraw draw;
  draw.u1 = rng.uniform(1, ms_bound);
  draw.u2 = rng.uniform(1, cnfl_bound);
  plan.draw = draw;
  plan.partitions = std::min(draw.u1, draw.u2);
  plan.assignment.reserve(static_cast<std::size_t>(plan.partitions));
  for (std::int64_t i = 0; i < plan.partitions; ++i) {
    plan.assignment.push_back(static_cast<int>(rng.uniform(1, brokers) - 1));
  }
  plan.predicted_latency_ms =
      bus::replication_latency(with_shape(calibration, brokers, replication), plan.partitions);
  return plan;
}

PartitionPlan bro_max(int brokers, int replication, const Constraints& constraints,
                      const bus::ClusterConfig& calibration) {
  constraints.validate();
  if (brokers < 1 || replication < 1 || replication > brokers) {
    throw Error(Errc::Infeasible, "need 1 <= r <= B");
  }
  const auto cfg = with_shape(calibration, brokers, replication);

  std::int64_t upper = std::min(constraints.max_partitions_total_factor * brokers,
                                constraints.max_partitions_per_broker * brokers / replication);
  if (cfg.latency_per_load_ms > 0) {
    const double headroom = constraints.l_max_ms - cfg.latency_base_ms;
    if (headroom < 0) throw Error(Errc::Infeasible, "base latency exceeds L_max");
    const double by_latency = headroom * brokers / (cfg.latency_per_load_ms * replication);
    // +1 absorbs rounding; the exact predicate below settles the boundary.
    upper = std::min(upper, static_cast<std::int64_t>(std::floor(by_latency)) + 1);
  }
  for (std::int64_t p = upper; p >= 1; --p) {
    if (round_robin_feasible(p, brokers, replication, constraints, cfg)) {
      return round_robin_plan(Algorithm::BroMax, p, brokers, replication, cfg);
    }
  }
  throw Error(Errc::Infeasible, "no P >= 1 satisfies the constraints for B=" +
                                    std::to_string(brokers) + ", r=" + std::to_string(replication));
}

PartitionPlan bro_min(std::int64_t requested_partitions, int replication,
                      const Constraints& constraints, const bus::ClusterConfig& calibration,
                      std::int64_t broker_cap) {
  constraints.validate();
  if (requested_partitions < 1) throw Error(Errc::Infeasible, "P_req must be >= 1");
  if (replication < 1) throw Error(Errc::Infeasible, "r must be >= 1");
  if (broker_cap <= 0) broker_cap = 10 * requested_partitions;

  const double headroom = constraints.l_max_ms - calibration.latency_base_ms;
  if (headroom < 0 || (headroom == 0 && calibration.latency_per_load_ms > 0)) {
    throw Error(Errc::Infeasible, "base latency leaves no room under L_max");
  }

  // Necessary conditions, each a lower bound on B.
  std::int64_t lower = replication;
  lower = std::max(lower, ceil_div(requested_partitions, constraints.max_partitions_total_factor));
  lower = std::max(lower, ceil_div(requested_partitions * replication,
                                   constraints.max_partitions_per_broker));
  if (calibration.latency_per_load_ms > 0) {
    const double by_latency =
        calibration.latency_per_load_ms * static_cast<double>(requested_partitions * replication) /
        headroom;
    lower = std::max<std::int64_t>(lower, static_cast<std::int64_t>(std::ceil(by_latency)) - 1);
  }
  lower = std::max<std::int64_t>(lower, 1);

  for (std::int64_t b = lower; b <= broker_cap; ++b) {
    const int brokers = static_cast<int>(b);
    const auto cfg = with_shape(calibration, brokers, replication);
    if (round_robin_feasible(requested_partitions, brokers, replication, constraints, cfg)) {
      return round_robin_plan(Algorithm::BroMin, requested_partitions, brokers, replication, cfg);
    }
  }
  throw Error(Errc::Infeasible, "no B <= " + std::to_string(broker_cap) + " carries P=" +
                                    std::to_string(requested_partitions));
}

std::string Violation::describe() const {
  std::ostringstream out;
  switch (kind) {
    case Kind::PerBrokerCap:
      out << "broker " << broker.value_or(-1) << " partition replicas " << value << " > " << limit;
      break;
    case Kind::TotalPartitions: out << "total partitions " << value << " > " << limit; break;
    case Kind::Latency: out << "predicted latency " << value << " ms > " << limit << " ms"; break;
    case Kind::ReplicationExceedsBrokers:
      out << "replication " << value << " > brokers " << limit;
      break;
  }
  return out.str();
}

std::vector<Violation> check_constraints(const PartitionPlan& plan, const Constraints& constraints,
                                         const bus::ClusterConfig& calibration) {
  std::vector<Violation> out;
  using Kind = Violation::Kind;
  if (plan.replication > plan.brokers) {
    out.push_back({Kind::ReplicationExceedsBrokers, static_cast<double>(plan.replication),
                   static_cast<double>(plan.brokers), std::nullopt});
  }
  const auto load = plan.replicas_per_broker();
  for (std::size_t b = 0; b < load.size(); ++b) {
    if (load[b] > constraints.max_partitions_per_broker) {
      out.push_back({Kind::PerBrokerCap, static_cast<double>(load[b]),
                     static_cast<double>(constraints.max_partitions_per_broker),
                     static_cast<int>(b)});
    }
  }
  const std::int64_t total_cap = constraints.max_partitions_total_factor * plan.brokers;
  if (plan.partitions > total_cap) {
    out.push_back({Kind::TotalPartitions, static_cast<double>(plan.partitions),
                   static_cast<double>(total_cap), std::nullopt});
  }
  if (plan.brokers >= 1) {
    const double latency =
        bus::replication_latency(with_shape(calibration, plan.brokers, plan.replication),
                                 plan.partitions);
    if (latency > constraints.l_max_ms) {
      out.push_back({Kind::Latency, latency, constraints.l_max_ms, std::nullopt});
    }
  }
  return out;
}

}  // namespace dmp::hdd
