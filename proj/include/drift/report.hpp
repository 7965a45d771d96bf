#pragma once

#include <json.hpp>

#include "drift/dynamics.hpp"
#include "drift/effective.hpp"
#include "drift/repair.hpp"

namespace drift {

using Json = nlohmann::ordered_json;

Json to_json(const Mode& m);
Json to_json(const std::vector<Mode>& modes);
Json to_json(const CriticalPoint& cp);
Json to_json(const H3aReport& r);
Json to_json(const H3bReport& r);
Json to_json(const Box& b);
Json to_json(const HomoclinicOrbit& orbit);
Json to_json(const ShadowReport& r);
Json to_json(const JumpResult& r);
/// Drift summary; samples are left to the CSV.
Json to_json(const TrajectoryRecord& r);
Json to_json(const RepairCertificate& c);

}  // namespace drift
