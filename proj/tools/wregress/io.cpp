#include "wregress/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wregress::io {

namespace {

const json& member(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(where + ": expected a JSON object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + ": missing \"" + key + "\"");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) throw ParseError(where + ": expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) throw ParseError(where + ": non-finite number");
  return x;
}

Vector vector_of(const json& v, Eigen::Index expected, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array");
  if (expected >= 0 && static_cast<Eigen::Index>(v.size()) != expected) {
    throw ParseError(where + ": expected " + std::to_string(expected) + " entries, got " +
                     std::to_string(v.size()));
  }
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = number(v[i], where + "[" + std::to_string(i) + "]");
  }
  return out;
}

Matrix matrix_of(const json& v, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!v.is_array()) throw ParseError(where + ": expected an array of rows");
  if (rows >= 0 && static_cast<Eigen::Index>(v.size()) != rows) {
    throw ParseError(where + ": expected " + std::to_string(rows) + " rows");
  }
  const Eigen::Index r = static_cast<Eigen::Index>(v.size());
  Matrix out(r, cols);
  for (Eigen::Index i = 0; i < r; ++i) {
    out.row(i) = vector_of(v[static_cast<std::size_t>(i)], cols, where + "[" + std::to_string(i) + "]").transpose();
  }
  return out;
}

Vector normalized_weights(Vector w, const std::string& where) {
  if ((w.array() < 0.0).any()) throw ParseError(where + ": negative weight");
  const double total = w.sum();
  if (std::abs(total - 1.0) > kRenormalizeTolerance) {
    throw ParseError(where + ": weights sum to " + format_shortest(total) + ", expected 1");
  }
  return w / total;
}

Eigen::Index dimension_of(const json& doc, const std::string& where) {
  const json& d = member(doc, "d", where);
  if (!d.is_number_integer() || d.get<long long>() < 1) {
    throw ParseError(where + ": \"d\" must be a positive integer");
  }
  return static_cast<Eigen::Index>(d.get<long long>());
}

std::string kind_of(const json& doc, const std::string& where) {
  const json& k = member(doc, "kind", where);
  if (!k.is_string()) throw ParseError(where + ": \"kind\" must be a string");
  const std::string kind = k.get<std::string>();
  if (kind != "discrete" && kind != "gaussian") {
    throw ParseError(where + ": unknown kind \"" + kind + "\"");
  }
  return kind;
}

void write_value(std::ostream& out, const json& v, int indent) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  const std::string inner(static_cast<std::size_t>(indent + 1) * 2, ' ');
  switch (v.type()) {
    case json::value_t::number_float: {
      const double x = v.get<double>();
      out << (std::isfinite(x) ? format_double(x) : "null");
      return;
    }
    case json::value_t::array: {
      if (v.empty()) {
        out << "[]";
        return;
      }
      const bool flat = std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_primitive(); });
      if (flat) {
        out << '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out << ", ";
          write_value(out, v[i], indent + 1);
        }
        out << ']';
        return;
      }
      out << "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        out << inner;
        write_value(out, v[i], indent + 1);
        out << (i + 1 < v.size() ? ",\n" : "\n");
      }
      out << pad << ']';
      return;
    }
    case json::value_t::object: {
      if (v.empty()) {
        out << "{}";
        return;
      }
      out << "{\n";
      std::size_t i = 0;
      for (auto it = v.begin(); it != v.end(); ++it, ++i) {
        out << inner << json(it.key()).dump() << ": ";
        write_value(out, it.value(), indent + 1);
        out << (i + 1 < v.size() ? ",\n" : "\n");
      }
      out << pad << '}';
      return;
    }
    default:
      out << v.dump();
  }
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

DatasetFile parse_dataset(const json& doc, bool require_times) {
  const std::string where = "dataset";
  const Eigen::Index d = dimension_of(doc, where);
  const std::string kind = kind_of(doc, where);
  const json& entries = member(doc, "entries", where);
  if (!entries.is_array() || entries.empty()) throw ParseError("dataset: \"entries\" must be a non-empty array");

  bool has_times = true;
  auto time_of = [&](const json& e, std::size_t i, const std::string& at) {
    if (e.contains("t")) return number(e["t"], at + ".t");
    if (require_times) throw ParseError(at + ": missing \"t\"");
    has_times = false;
    return static_cast<double>(i);
  };

  try {
    if (kind == "discrete") {
      std::vector<TimedMeasure> items;
      std::vector<std::vector<std::size_t>> kept;
      for (std::size_t i = 0; i < entries.size(); ++i) {
        const std::string at = "dataset.entries[" + std::to_string(i) + "]";
        const json& e = entries[i];
        const double t = time_of(e, i, at);
        const json& pts = member(e, "points", at);
        Matrix points = matrix_of(pts, -1, d, at + ".points");
        Vector w = normalized_weights(vector_of(member(e, "weights", at), points.rows(), at + ".weights"), at + ".weights");
        std::vector<std::size_t> survivors;
        for (Eigen::Index k = 0; k < w.size(); ++k) {
          if (w[k] > 0.0) survivors.push_back(static_cast<std::size_t>(k));
        }
        kept.push_back(std::move(survivors));
        items.push_back({t, DiscreteMeasure(std::move(points), std::move(w))});
      }
      DiscreteDatasetFile out{TimedDataset(std::move(items)), std::move(kept), true};
      out.has_times = has_times;
      return out;
    }
    std::vector<GaussianTimedMeasure> items;
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const std::string at = "dataset.entries[" + std::to_string(i) + "]";
      const json& e = entries[i];
      const double t = time_of(e, i, at);
      Vector mean = vector_of(member(e, "mean", at), d, at + ".mean");
      Matrix cov = matrix_of(member(e, "cov", at), d, d, at + ".cov");
      items.push_back({t, GaussianMeasure(std::move(mean), std::move(cov))});
    }
    GaussianDatasetFile out{GaussianDataset(std::move(items)), true};
    out.has_times = has_times;
    return out;
  } catch (const ParseError&) {
    throw;
  } catch (const InvalidMeasureError& e) {
    throw ParseError(e.what());
  } catch (const InvalidCovarianceError& e) {
    throw ParseError(e.what());
  } catch (const EmptyMeasureError& e) {
    throw ParseError(e.what());
  }
}

std::vector<PairwiseConstraint> parse_pairwise(const json& doc, const DiscreteDatasetFile& data) {
  const json& list = member(doc, "constraints", "pairwise");
  if (!list.is_array()) throw ParseError("pairwise: \"constraints\" must be an array");
  const auto& entries = data.dataset.entries();
  std::vector<PairwiseConstraint> out;
  for (std::size_t c = 0; c < list.size(); ++c) {
    const std::string at = "pairwise.constraints[" + std::to_string(c) + "]";
    const json& a = member(list[c], "a", at);
    const json& b = member(list[c], "b", at);
    if (!a.is_number_integer() || !b.is_number_integer()) throw ParseError(at + ": a and b must be integers");
    const long long ia = a.get<long long>(), ib = b.get<long long>();
    if (ia < 0 || ib < 0 || ia >= static_cast<long long>(entries.size()) ||
        ib >= static_cast<long long>(entries.size()) || ia == ib) {
      throw ParseError(at + ": entry indices out of range");
    }
    const auto& ka = data.kept_atoms[static_cast<std::size_t>(ia)];
    const auto& kb = data.kept_atoms[static_cast<std::size_t>(ib)];
    const json& jj = member(list[c], "joint", at);
    if (!jj.is_array() || jj.empty() || !jj[0].is_array()) throw ParseError(at + ".joint: expected a matrix");
    const Matrix full = matrix_of(jj, -1, static_cast<Eigen::Index>(jj[0].size()), at + ".joint");
    if ((full.array() < 0.0).any()) throw ParseError(at + ".joint: negative entry");

    Matrix joint(static_cast<Eigen::Index>(ka.size()), static_cast<Eigen::Index>(kb.size()));
    double kept_mass = 0.0;
    for (std::size_t i = 0; i < ka.size(); ++i) {
      for (std::size_t j = 0; j < kb.size(); ++j) {
        const auto r = static_cast<Eigen::Index>(ka[i]);
        const auto s = static_cast<Eigen::Index>(kb[j]);
        if (r >= full.rows() || s >= full.cols()) throw ParseError(at + ".joint: shape does not match the entries");
        joint(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = full(r, s);
        kept_mass += full(r, s);
      }
    }
    const double total = full.sum();
    if (std::abs(total - 1.0) > kRenormalizeTolerance) throw ParseError(at + ".joint: mass is not 1");
    if (total - kept_mass > 1e-12) {
      throw InfeasibleError(at + ".joint: mass on atoms with zero weight");
    }
    out.push_back({static_cast<std::size_t>(ia), static_cast<std::size_t>(ib), joint / total});
  }
  return out;
}

EndpointLaw parse_endpoint_law(const json& doc) {
  if (doc.is_object() && doc.contains("pi")) return parse_endpoint_law(doc["pi"]);
  const std::string where = "endpoint law";
  const Eigen::Index d = dimension_of(doc, where);
  const std::string kind = kind_of(doc, where);
  try {
    if (kind == "discrete") {
      const json& atoms = member(doc, "atoms", where);
      if (!atoms.is_array() || atoms.empty()) throw ParseError("endpoint law: \"atoms\" must be a non-empty array");
      const auto n = static_cast<Eigen::Index>(atoms.size());
      Matrix x0(n, d), x1(n, d);
      Vector w(n);
      for (Eigen::Index k = 0; k < n; ++k) {
        const std::string at = "endpoint law.atoms[" + std::to_string(k) + "]";
        const json& a = atoms[static_cast<std::size_t>(k)];
        x0.row(k) = vector_of(member(a, "x0", at), d, at + ".x0").transpose();
        x1.row(k) = vector_of(member(a, "x1", at), d, at + ".x1").transpose();
        w[k] = number(member(a, "weight", at), at + ".weight");
      }
      return DiscreteEndpointLaw(std::move(x0), std::move(x1), normalized_weights(std::move(w), "endpoint law"));
    }
    Vector mean = vector_of(member(doc, "mean", where), 2 * d, "endpoint law.mean");
    Matrix cov = matrix_of(member(doc, "cov", where), 2 * d, 2 * d, "endpoint law.cov");
    return GaussianEndpointLaw(std::move(mean), std::move(cov));
  } catch (const ParseError&) {
    throw;
  } catch (const InvalidMeasureError& e) {
    throw ParseError(e.what());
  } catch (const InvalidCovarianceError& e) {
    throw ParseError(e.what());
  } catch (const EmptyMeasureError& e) {
    throw ParseError(e.what());
  }
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(vector_to_json(m.row(i).transpose()));
  return out;
}

json measure_to_json(const DiscreteMeasure& m) {
  return json{{"points", matrix_to_json(m.points())}, {"weights", vector_to_json(m.weights())}};
}

json measure_to_json(const GaussianMeasure& m) {
  return json{{"mean", vector_to_json(m.mean())}, {"cov", matrix_to_json(m.covariance())}};
}

json endpoint_law_to_json(const EndpointLaw& pi) {
  if (const auto* law = std::get_if<DiscreteEndpointLaw>(&pi)) {
    json atoms = json::array();
    for (Eigen::Index k = 0; k < law->size(); ++k) {
      atoms.push_back(json{{"x0", vector_to_json(law->x0().row(k).transpose())},
                           {"x1", vector_to_json(law->x1().row(k).transpose())},
                           {"weight", law->weights()[k]}});
    }
    return json{{"kind", "discrete"}, {"d", law->dim()}, {"atoms", std::move(atoms)}};
  }
  const auto& law = std::get<GaussianEndpointLaw>(pi);
  return json{{"kind", "gaussian"},
              {"d", law.dim()},
              {"mean", vector_to_json(law.mean())},
              {"cov", matrix_to_json(law.covariance())}};
}

void write_json(std::ostream& out, const json& doc) {
  write_value(out, doc, 0);
  out << '\n';
}

std::string dump_json(const json& doc) {
  std::ostringstream os;
  write_json(os, doc);
  return os.str();
}

}  // namespace wregress::io
