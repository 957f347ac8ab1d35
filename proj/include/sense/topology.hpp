#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sense/calendar.hpp"
#include "sense/model.hpp"

namespace sense {

enum class EdgeScope { kIntra, kInter };

struct Edge {
  Urn a;  // a < b
  Urn b;
  EdgeScope scope = EdgeScope::kIntra;

  bool operator==(const Edge&) const = default;
};

struct Location {
  std::string domain_id;
  const NodeDesc* node = nullptr;  // owning node (for a port) or the node itself
  const Port* port = nullptr;      // set when the URN names a port
};

// Immutable multi-domain graph stitched from per-domain models. Vertices are
// ports; edges are switch-internal cross-connects, declared intra-domain
// links, and mutually aliased inter-domain port pairs.
class UnionModel {
 public:
  struct PortInfo {
    Urn urn;
    std::string domain_id;
    const NodeDesc* node = nullptr;
    const Port* port = nullptr;
  };

  UnionModel() = default;
  UnionModel(const UnionModel&) = delete;
  UnionModel& operator=(const UnionModel&) = delete;

  const std::map<std::string, DomainModel>& models() const { return models_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Ports are indexed in ascending URN order.
  size_t port_count() const { return ports_.size(); }
  const PortInfo& port(size_t index) const { return ports_[index]; }
  std::optional<size_t> port_index(const Urn& urn) const;
  // Neighbour indices, ascending.
  const std::vector<size_t>& neighbors(size_t index) const { return adjacency_[index]; }
  bool adjacent(size_t a, size_t b) const;
  bool is_inter(size_t a, size_t b) const { return ports_[a].domain_id != ports_[b].domain_id; }

  // Orchestrator-side calendar rebuilt from the pulled model state.
  const ReservationCalendar& calendar(size_t index) const { return calendars_[index]; }

  // Throws unknown-urn.
  Location locate(const Urn& urn) const;
  // A terminal's attachment port: the port itself, or a node's lowest-URN port.
  size_t terminal_port(const Urn& urn) const;

  json export_graph() const;

  friend std::shared_ptr<const UnionModel> integrate_models(std::vector<DomainModel> models,
                                                            double overbook_factor);

 private:
  std::map<std::string, DomainModel> models_;
  std::vector<PortInfo> ports_;
  std::unordered_map<std::string, size_t> port_by_urn_;
  std::unordered_map<std::string, const NodeDesc*> node_by_urn_;
  std::vector<std::vector<size_t>> adjacency_;
  std::vector<Edge> edges_;
  std::vector<ReservationCalendar> calendars_;
  std::vector<std::string> warnings_;
};

// Throws duplicate-domain. Output is independent of input order.
std::shared_ptr<const UnionModel> integrate_models(std::vector<DomainModel> models,
                                                   double overbook_factor = kDefaultOverbookFactor);

// Ordered, de-duplicated domain traversal of a port path. Throws invalid-path
// when consecutive ports are not adjacent or a URN is unknown.
std::vector<std::string> domains_on_path(const UnionModel& u, const std::vector<Urn>& path);

}  // namespace sense
