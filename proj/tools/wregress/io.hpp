#pragma once

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "wregress/errors.hpp"
#include "wregress/gaussian.hpp"
#include "wregress/mmot.hpp"
#include "wregress/regression.hpp"

namespace wregress::io {

using nlohmann::json;

/// Malformed or unreadable input file.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Weight vectors whose sum is off by at most this much are renormalized.
inline constexpr double kRenormalizeTolerance = 1e-6;

struct DiscreteDatasetFile {
  TimedDataset dataset;
  /// Per entry: indices (in file order) of the atoms that survived
  /// zero-weight pruning; used to remap pairwise joints.
  std::vector<std::vector<std::size_t>> kept_atoms;
  bool has_times = true;
};

struct GaussianDatasetFile {
  GaussianDataset dataset;
  bool has_times = true;
};

using DatasetFile = std::variant<DiscreteDatasetFile, GaussianDatasetFile>;

json read_json_file(const std::string& path);

/// Parses a dataset document. Entries without "t" are accepted only when
/// `require_times` is false; their timestamp is set to the entry index.
DatasetFile parse_dataset(const json& doc, bool require_times = true);

std::vector<PairwiseConstraint> parse_pairwise(const json& doc, const DiscreteDatasetFile& data);

/// Accepts a bare endpoint-law document or any document with a "pi" member.
EndpointLaw parse_endpoint_law(const json& doc);
json endpoint_law_to_json(const EndpointLaw& pi);

json vector_to_json(const Vector& v);
json matrix_to_json(const Matrix& m);
json measure_to_json(const DiscreteMeasure& m);
json measure_to_json(const GaussianMeasure& m);

/// Pretty JSON with every floating-point number written with 17
/// significant digits (non-finite values become null).
void write_json(std::ostream& out, const json& doc);
std::string dump_json(const json& doc);

/// %.17g
std::string format_double(double v);
/// Shortest representation that round-trips.
std::string format_shortest(double v);

}  // namespace wregress::io
