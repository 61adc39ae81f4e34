#pragma once

#include "lowems/measurement.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace lowems {

/// Observation bundle: the on-disk form of an ObservationSet, read by the
/// `solve` subcommand. JSON object with keys
///   format: "lowems-observations", version: 1,
///   variant: "sampling" | "gaussian", n1, n2, sigma1,
///   bins: [{ y: [...], and one of
///            indices: [[row, col], ...]            (sampling)
///            replay: {seed, stream}                (gaussian, regenerated)
///            matrices: [[a_11, a_12, ...], ...]    (gaussian, each A_i row-major) }],
///   truth (optional): {sigma2, U: rows, V_seq: [rows, ...]}
nlohmann::json bundle_to_json(const ObservationSet& obs, bool include_truth = true);
ObservationSet bundle_from_json(const nlohmann::json& j);

void save_bundle(const std::string& path, const ObservationSet& obs, bool include_truth = true);
ObservationSet load_bundle(const std::string& path);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// Plain numeric CSV, one matrix row per line, 17 significant digits.
void write_matrix_csv(std::ostream& out, const Matrix& m);
/// `step,objective` rows.
void write_trace_csv(std::ostream& out, const std::vector<double>& trace);

}  // namespace lowems
