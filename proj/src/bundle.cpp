#include "lowems/bundle.hpp"

#include "lowems/harness.hpp"

#include <fstream>
#include <ostream>

namespace lowems {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw InvalidInput("bundle: matrix must be a nonempty array of rows");
  const auto cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw InvalidInput("bundle: ragged matrix rows");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = j[i][k].get<double>();
  }
  return m;
}

json bundle_to_json(const ObservationSet& obs, bool include_truth) {
  obs.validate();
  json j;
  j["format"] = "lowems-observations";
  j["version"] = 1;
  j["variant"] = to_string(obs.kind());
  j["n1"] = obs.rows();
  j["n2"] = obs.cols();
  j["sigma1"] = obs.sigma1;
  json bins = json::array();
  for (std::size_t t = 0; t < obs.d(); ++t) {
    const LinearOperator& op = obs.ops[t];
    json bin;
    bin["y"] = std::vector<double>(obs.y[t].data(), obs.y[t].data() + obs.y[t].size());
    if (op.kind() == OperatorKind::Sampling) {
      json idx = json::array();
      for (const EntryIndex& e : op.indices()) idx.push_back({e.row, e.col});
      bin["indices"] = std::move(idx);
    } else if (op.is_replay()) {
      bin["replay"] = {{"seed", op.replay_stream()->seed()}, {"stream", op.replay_stream()->stream_id()}};
    } else {
      json mats = json::array();
      op.for_each_sensing_matrix([&](Eigen::Index, const Eigen::Ref<const Matrix>& A) {
        json flat = json::array();
        for (Eigen::Index r = 0; r < A.rows(); ++r)
          for (Eigen::Index c = 0; c < A.cols(); ++c) flat.push_back(A(r, c));
        mats.push_back(std::move(flat));
      });
      bin["matrices"] = std::move(mats);
    }
    bins.push_back(std::move(bin));
  }
  j["bins"] = std::move(bins);
  if (include_truth && obs.truth) {
    json truth;
    truth["sigma2"] = obs.truth->sigma2;
    truth["U"] = matrix_to_json(obs.truth->U);
    json vs = json::array();
    for (const Matrix& V : obs.truth->V_seq) vs.push_back(matrix_to_json(V));
    truth["V_seq"] = std::move(vs);
    j["truth"] = std::move(truth);
  }
  return j;
}

ObservationSet bundle_from_json(const json& j) {
  try {
    if (j.value("format", std::string()) != "lowems-observations") throw InvalidInput("bundle: unrecognized format tag");
    if (j.at("version").get<int>() != 1) throw InvalidInput("bundle: unsupported version");
    const OperatorKind kind = parse_operator_kind(j.at("variant").get<std::string>());
    const auto n1 = j.at("n1").get<Eigen::Index>();
    const auto n2 = j.at("n2").get<Eigen::Index>();
    ObservationSet obs;
    obs.sigma1 = j.value("sigma1", 0.0);
    for (const json& bin : j.at("bins")) {
      const auto y = bin.at("y").get<std::vector<double>>();
      const auto m = static_cast<Eigen::Index>(y.size());
      if (kind == OperatorKind::Sampling) {
        std::vector<EntryIndex> idx;
        for (const json& e : bin.at("indices")) idx.push_back({e.at(0).get<Eigen::Index>(), e.at(1).get<Eigen::Index>()});
        obs.ops.push_back(LinearOperator::sampling(n1, n2, std::move(idx)));
      } else if (bin.contains("replay")) {
        RandomStream stream(bin["replay"].at("seed").get<std::uint64_t>(), bin["replay"].at("stream").get<std::uint64_t>());
        obs.ops.push_back(LinearOperator::gaussian_replay(n1, n2, m, stream));
      } else {
        const json& mats = bin.at("matrices");
        Matrix stacked(static_cast<Eigen::Index>(mats.size()), n1 * n2);
        for (std::size_t i = 0; i < mats.size(); ++i) {
          const auto flat = mats[i].get<std::vector<double>>();
          if (static_cast<Eigen::Index>(flat.size()) != n1 * n2) throw InvalidInput("bundle: sensing matrix size mismatch");
          // Row-major on disk, column-major vec in memory.
          for (Eigen::Index r = 0; r < n1; ++r)
            for (Eigen::Index c = 0; c < n2; ++c)
              stacked(static_cast<Eigen::Index>(i), r + c * n1) = flat[static_cast<std::size_t>(r * n2 + c)];
        }
        obs.ops.push_back(LinearOperator::gaussian_from_stacked(n1, n2, std::move(stacked)));
      }
      obs.y.push_back(Eigen::Map<const Vector>(y.data(), m));
    }
    if (j.contains("truth")) {
      auto truth = std::make_shared<DynamicGroundTruth>();
      const json& t = j["truth"];
      truth->sigma2 = t.value("sigma2", 0.0);
      truth->U = matrix_from_json(t.at("U"));
      for (const json& v : t.at("V_seq")) {
        truth->V_seq.push_back(matrix_from_json(v));
        truth->X_seq.push_back(truth->U * truth->V_seq.back().transpose());
      }
      obs.truth = std::move(truth);
    }
    obs.validate();
    return obs;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("bundle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw InvalidInput(std::string("bundle: ") + e.what());
  }
}

void save_bundle(const std::string& path, const ObservationSet& obs, bool include_truth) {
  std::ofstream out(path);
  if (!out) throw Error(path + ": cannot open for writing");
  out << bundle_to_json(obs, include_truth).dump() << '\n';
}

ObservationSet load_bundle(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput(path + ": cannot open bundle");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput(path + ": " + e.what());
  }
  return bundle_from_json(j);
}

void write_matrix_csv(std::ostream& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_trace_csv(std::ostream& out, const std::vector<double>& trace) {
  out << "step,objective\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_double(trace[i]) << '\n';
}

}  // namespace lowems
