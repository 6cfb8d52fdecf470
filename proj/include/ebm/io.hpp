#pragma once

// File formats. Every writer has a matching reader.
//
//  * Subset-indexed vectors (spectra, couplings): JSON
//      {"n_sites": N, "entries": [[mask, value], ...]}
//    plus "max_order" for truncated vectors; or CSV "mask,value" after a
//    comment header stating N and the bit encoding.
//  * Higher-order model checkpoint: {"n_sites", "couplings": [[mask, value], ...]}
//    (+ "max_order" when truncated).
//  * RBM checkpoint: {"convention", "n_visible", "n_hidden", "weights" (row-major),
//    "hidden_biases", "visible_fields"}.
//  * Datasets: one configuration per line as space-separated -1/+1, with a JSON
//    sidecar <file>.json holding the generating config and seed.

#include <json.hpp>

#include <Eigen/Dense>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "ebm/dynamics.hpp"
#include "ebm/hobm.hpp"
#include "ebm/pbf.hpp"
#include "ebm/rbm.hpp"

namespace ebm::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& doc);
void write_text(const fs::path& path, const std::string& text);

json subset_vector_to_json(const SubsetVector& v);
SubsetVector subset_vector_from_json(const json& doc);
void write_subset_csv(std::ostream& out, const SubsetVector& v);
SubsetVector read_subset_csv(std::istream& in);

json hobm_to_json(const HigherOrderModel& model);
HigherOrderModel hobm_from_json(const json& doc);

json rbm_to_json(const RbmParameters& p);
RbmParameters rbm_from_json(const json& doc);
std::string to_string(Convention c);
Convention parse_convention(const std::string& name);

void write_dataset(const fs::path& path, const EmpiricalSamples& samples, const json& sidecar);
EmpiricalSamples read_dataset(const fs::path& path);
fs::path sidecar_path(const fs::path& dataset);

void write_matrix_csv(std::ostream& out, const Eigen::MatrixXd& m, const std::string& comment);
Eigen::MatrixXd read_matrix_csv(std::istream& in);

json to_json(const FixedPointReport& r);
FixedPointReport fixed_point_report_from_json(const json& doc);
json to_json(const DsbReport& r);
DsbReport dsb_report_from_json(const json& doc);

}  // namespace ebm::io
