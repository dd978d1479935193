#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmp/bus.hpp"
#include "dmp/entity.hpp"

namespace dmp::hdd {

/// SplitMix64 stream. Bounded draws use rejection sampling so every value in
/// the range is equally likely and sequences are identical on all platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next();
  /// Uniform over the closed range [lo, hi]; requires lo <= hi.
  std::int64_t uniform(std::int64_t lo, std::int64_t hi);
  /// Uniform double in [0, 1).
  double unit();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

struct Constraints {
  std::int64_t max_partitions_per_broker = 1000;  // replicas included
  std::int64_t max_partitions_total_factor = 100;  // total P <= factor * B
  double l_max_ms = 5.0;

  void validate() const;
  static Constraints from_document(const Document& doc);
  Document to_document() const;
};

enum class Algorithm { MsCnfl, BroMin, BroMax };
std::string_view to_string(Algorithm algorithm) noexcept;
Algorithm parse_algorithm(std::string_view text);

struct MsCnflDraw {
  std::int64_t u1 = 0;  // uniform in [1, floor(1000 * B / r)]
  std::int64_t u2 = 0;  // uniform in [1, 100 * B]
};

struct PartitionPlan {
  Algorithm algorithm = Algorithm::BroMax;
  std::int64_t partitions = 0;
  int brokers = 0;
  int replication = 0;
  /// Lead broker (0-based) per partition; replica j sits on (lead + j) mod B.
  std::vector<int> assignment;
  double predicted_latency_ms = 0.0;
  std::optional<MsCnflDraw> draw;

  std::vector<std::int64_t> replicas_per_broker() const;
  std::int64_t open_handles(int handle_cost_per_replica) const;
  Document to_document() const;
};

/// Busiest broker under round-robin placement of P partitions with r
/// replicas over B brokers: r * floor(P / B) + min(r, P mod B).
std::int64_t round_robin_max_load(std::int64_t partitions, int brokers, int replication);

/// Randomized industrial benchmark: P = min(u1, u2) and an independent
/// uniform lead broker per partition. `calibration` supplies the latency
/// constants; its broker/replication fields are ignored.
/// Throws Error(EmptyRange) when floor(1000 * B / r) < 1.
PartitionPlan ms_cnfl(int brokers, int replication, Rng& rng,
                      const bus::ClusterConfig& calibration = {});

/// Largest P satisfying every constraint on B brokers. Throws
/// Error(Infeasible).
PartitionPlan bro_max(int brokers, int replication, const Constraints& constraints,
                      const bus::ClusterConfig& calibration = {});

/// Fewest brokers (>= r) that carry `requested_partitions` within every
/// constraint. Searches up to `broker_cap` (0 means 10 * P_req). Throws
/// Error(Infeasible).
PartitionPlan bro_min(std::int64_t requested_partitions, int replication,
                      const Constraints& constraints, const bus::ClusterConfig& calibration = {},
                      std::int64_t broker_cap = 0);

struct Violation {
  enum class Kind { PerBrokerCap, TotalPartitions, Latency, ReplicationExceedsBrokers };

  Kind kind = Kind::Latency;
  double value = 0.0;
  double limit = 0.0;
  std::optional<int> broker;

  std::string describe() const;
};

/// Every violated constraint, evaluated on the plan's actual assignment.
/// Latency is recomputed from `calibration` with the plan's B and r.
std::vector<Violation> check_constraints(const PartitionPlan& plan, const Constraints& constraints,
                                         const bus::ClusterConfig& calibration = {});

}  // namespace dmp::hdd
