#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uspas/cascade_synth.hpp"
#include "uspas/certcheck.hpp"
#include "uspas/compfn.hpp"
#include "uspas/klbound.hpp"
#include "uspas/robotlab.hpp"

namespace uspas::report {

/// Key order is preserved so reports diff cleanly.
using Json = nlohmann::ordered_json;

/// Nodes used when a function or surface has to be tabulated.
struct ExportGrid {
  std::vector<double> s;
  std::vector<double> t;
};

/// 0 followed by `count` log-spaced radii up to s_max, and `count` + 1
/// evenly spaced times on [0, horizon].
ExportGrid make_export_grid(double s_max, double horizon, int count = 40);

/// Finite numbers as numbers, everything else as "inf" / "-inf" / "nan".
Json number(double v);
Json vector(const Vector& v);
Json vector(std::span<const double> v);

/// Kind, family, closed-form parameters when available, and the function
/// tabulated on `nodes` (clipped to its domain).
Json to_json(const ComparisonFunction& f, std::span<const double> nodes);
/// Family plus the surface sampled on the grid (rows are s).
Json to_json(const KLBound& beta, const ExportGrid& grid);

Json to_json(const BallPair& balls);
Json to_json(const Counterexample& cx);
Json to_json(const IntegratorInfo& info);
/// Verdict with confidence metadata; witnesses tabulated on `grid`.
Json to_json(const StabilityVerdict& v, const ExportGrid& grid);
Json to_json(const SynthesizedEstimate& est, const ExportGrid& grid);
Json to_json(const LyapunovUspasReport& r);
Json to_json(const FalsifierReport& r);
Json to_json(const PidGains& g);
Json to_json(const SemiglobalResult& r);

// -- CSV --------------------------------------------------------------------

/// `s,value` rows.
std::string function_csv(const ComparisonFunction& f, std::span<const double> nodes);
/// `s,value` rows of raw envelope samples.
std::string samples_csv(std::span<const EnvelopeSample> samples);
/// `s,t,value` rows, s outer.
std::string surface_csv(const KLBound& beta, const ExportGrid& grid);

}  // namespace uspas::report
