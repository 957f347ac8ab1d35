#pragma once
// Shared fixtures: the baseline8 roster as plain models, and short URN helpers.

#include <memory>
#include <string>
#include <vector>

#include "sense/clock.hpp"
#include "sense/harness.hpp"
#include "sense/rm.hpp"
#include "sense/topology.hpp"

namespace fixture {

inline std::string dtn(const std::string& domain, const std::string& host) {
  return "urn:ogf:network:" + domain + ":2013:server+" + host;
}
inline std::string sw(const std::string& domain, const std::string& port) {
  return "urn:ogf:network:" + domain + ":2013:switch+" + port;
}

inline const std::string kNersc = dtn("nersc.gov", "dtm11.nersc.gov");
inline const std::string kCaltech = dtn("caltech.edu", "xfer-2.ultralight.org");
inline const std::string kUmd = dtn("umd.edu", "dtn1.umd.edu");
inline const std::string kFnal = dtn("fnal.gov", "dtn1.fnal.gov");
inline const std::string kAnl = dtn("anl.gov", "dtn1.anl.gov");

inline sense::harness::Manifest baseline8(double latency_scale = 0) {
  auto spec = sense::harness::preset_spec("baseline8", 1);
  spec.latency_scale = latency_scale;
  return sense::harness::gen_topology(spec);
}

inline std::vector<sense::DomainModel> baseline_models() {
  auto m = baseline8();
  auto clock = std::make_shared<sense::ManualClock>(sense::harness::kReferenceNow);
  std::vector<sense::DomainModel> out;
  for (const auto& rc : m.rms) {
    sense::ResourceManager rm(rc, clock);
    out.push_back(*rm.get_model(std::nullopt).model);
  }
  return out;
}

inline std::shared_ptr<const sense::UnionModel> baseline_union() {
  return sense::integrate_models(baseline_models());
}

}  // namespace fixture

namespace fixture {

// Minimal intent document; `terminals` per connection, bandwidth in mbps.
inline nlohmann::json intent(const std::vector<std::vector<std::string>>& terminals, int64_t mbps = 1000,
                             const std::string& alias = "t") {
  nlohmann::json conns = nlohmann::json::array();
  bool mp = false;
  for (size_t i = 0; i < terminals.size(); ++i) {
    nlohmann::json ts = nlohmann::json::array();
    for (const auto& t : terminals[i]) ts.push_back({{"uri", t}, {"label", "any"}});
    mp = mp || terminals[i].size() > 2;
    conns.push_back({{"name", "connection " + std::to_string(i + 1)},
                     {"terminals", ts},
                     {"bandwidth", {{"qos_class", "guaranteedCapped"}, {"capacity", mbps}, {"unit", "mbps"}}}});
  }
  return {{"service_type", mp ? "Multi-Point VLAN Bridge" : "Multi-Path P2P VLAN"},
          {"service_alias", alias},
          {"connections", conns}};
}

}  // namespace fixture
