#pragma once

// JSON (de)serialization for instances, solver reports and certificates,
// plus the CSV number format shared by all writers.
//
// Instance document layout (the interchange contract):
//   {
//     "n": int, "m": int,
//     "A": [n*n doubles, row-major], "h1": [n], "a": [n], "b": [n],
//     "scenarios": [ {"B": [n*m], "L": [m*n], "M": [m*m],
//                     "h2": [m], "l": [m], "u": [m], "weight": double}, ... ],
//     "metadata": { "version": ..., optional "blocks", "generator", ... }
//   }
// All matrices are flat row-major arrays of 64-bit floats.

#include "svi2/model.hpp"
#include "svi2/phm.hpp"
#include "svi2/types.hpp"
#include "svi2/version.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace svi2::io {

using nlohmann::json;

// Shortest-round-trip would also do, but %.17g is the conventional CSV
// contract and prints identically everywhere.
inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline json matrix_to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

inline Matrix matrix_from_json(const json& j, int rows, int cols, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols) {
    throw std::invalid_argument(std::string(name) + ": expected flat array of " +
                                std::to_string(rows * cols) + " numbers");
  }
  Matrix m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) m(i, c) = j[k++].get<double>();
  }
  return m;
}

inline Vector vector_from_json(const json& j, int size, const char* name) {
  if (!j.is_array() || static_cast<int>(j.size()) != size) {
    throw std::invalid_argument(std::string(name) + ": expected array of " +
                                std::to_string(size) + " numbers");
  }
  Vector v(size);
  for (int i = 0; i < size; ++i) v[i] = j[i].get<double>();
  return v;
}

inline json instance_to_json(const TwoStageInstance& inst) {
  json doc;
  doc["n"] = inst.n;
  doc["m"] = inst.m;
  doc["A"] = matrix_to_json(inst.A);
  doc["h1"] = vector_to_json(inst.h1);
  doc["a"] = vector_to_json(inst.a);
  doc["b"] = vector_to_json(inst.b);
  json scs = json::array();
  for (const Scenario& sc : inst.scenarios) {
    json s;
    s["B"] = matrix_to_json(sc.B);
    s["L"] = matrix_to_json(sc.L);
    s["M"] = matrix_to_json(sc.M);
    s["h2"] = vector_to_json(sc.h2);
    s["l"] = vector_to_json(sc.l);
    s["u"] = vector_to_json(sc.u);
    s["weight"] = sc.weight;
    scs.push_back(std::move(s));
  }
  doc["scenarios"] = std::move(scs);
  json meta;
  meta["version"] = kVersion;
  if (inst.blocks) {
    meta["blocks"] = {{"n1", inst.blocks->n1},
                      {"n2", inst.blocks->n2},
                      {"m1", inst.blocks->m1},
                      {"m2", inst.blocks->m2}};
  }
  doc["metadata"] = std::move(meta);
  return doc;
}

inline TwoStageInstance instance_from_json(const json& doc) {
  TwoStageInstance inst;
  inst.n = doc.at("n").get<int>();
  inst.m = doc.at("m").get<int>();
  if (inst.n < 1 || inst.m < 1) throw std::invalid_argument("instance: n and m must be >= 1");
  inst.A = matrix_from_json(doc.at("A"), inst.n, inst.n, "A");
  inst.h1 = vector_from_json(doc.at("h1"), inst.n, "h1");
  inst.a = vector_from_json(doc.at("a"), inst.n, "a");
  inst.b = vector_from_json(doc.at("b"), inst.n, "b");
  const json& scs = doc.at("scenarios");
  if (!scs.is_array() || scs.empty()) {
    throw std::invalid_argument("instance: scenarios must be a nonempty array");
  }
  inst.scenarios.reserve(scs.size());
  for (const json& s : scs) {
    Scenario sc;
    sc.B = matrix_from_json(s.at("B"), inst.n, inst.m, "B");
    sc.L = matrix_from_json(s.at("L"), inst.m, inst.n, "L");
    sc.M = matrix_from_json(s.at("M"), inst.m, inst.m, "M");
    sc.h2 = vector_from_json(s.at("h2"), inst.m, "h2");
    sc.l = vector_from_json(s.at("l"), inst.m, "l");
    sc.u = vector_from_json(s.at("u"), inst.m, "u");
    sc.weight = s.at("weight").get<double>();
    inst.scenarios.push_back(std::move(sc));
  }
  if (doc.contains("metadata") && doc["metadata"].contains("blocks")) {
    const json& b = doc["metadata"]["blocks"];
    inst.blocks = BlockDims{b.at("n1").get<int>(), b.at("n2").get<int>(), b.at("m1").get<int>(),
                            b.at("m2").get<int>()};
  }
  inst.validate();
  return inst;
}

inline void save_json(const std::string& path, const json& doc) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return json::parse(in);
}

inline void save_instance(const std::string& path, const TwoStageInstance& inst,
                          const json& extra_metadata = json::object()) {
  json doc = instance_to_json(inst);
  for (auto it = extra_metadata.begin(); it != extra_metadata.end(); ++it) {
    doc["metadata"][it.key()] = it.value();
  }
  save_json(path, doc);
}

inline TwoStageInstance load_instance(const std::string& path) {
  return instance_from_json(load_json(path));
}

inline json certificate_to_json(const MonotonicityCertificate& cert) {
  json doc;
  doc["certified"] = cert.certified;
  doc["kappa"] = cert.kappa;
  doc["min_eig_sym"] = cert.min_eig_sym;
  doc["version"] = kVersion;
  return doc;
}

inline json report_to_json(const phm::PhmReport& rep) {
  json doc;
  doc["status"] = boxvi::to_string(rep.status);
  doc["iterations"] = rep.iterations;
  doc["res"] = rep.res;
  doc["x"] = vector_to_json(rep.x);
  json ys = json::array();
  for (const Vector& y : rep.y) ys.push_back(vector_to_json(y));
  doc["y"] = std::move(ys);
  doc["version"] = kVersion;
  return doc;
}

// Per-iteration history: one row per outer iteration with the consensus
// iterate; res is nan on iterations where the (possibly strided)
// residual evaluation was skipped.
inline void write_history_csv(std::ostream& out, const std::vector<phm::PhmHistoryRow>& history,
                              int n) {
  out << "nu,res";
  for (int i = 0; i < n; ++i) out << ",x" << i;
  out << '\n';
  for (const phm::PhmHistoryRow& row : history) {
    out << row.nu << ',' << fmt17(row.res);
    for (int i = 0; i < n; ++i) out << ',' << fmt17(row.x_bar[i]);
    out << '\n';
  }
}

}  // namespace svi2::io
