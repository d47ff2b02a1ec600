#pragma once

#include <Eigen/Dense>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "pflqr/model.hpp"
#include "pflqr/selection.hpp"
#include "pflqr/simulate.hpp"

namespace pflqr {

// Shortest decimal text that reads back to the same double ("nan", "inf" and
// "-inf" for non-finite values). Locale independent.
std::string format_double(double value);

// Parses a whole field as a double; what names the field in the error.
double parse_double(std::string_view text, std::string_view what);

std::string read_text(const std::string& path);
void write_text(const std::string& path, const std::string& content);

// Sidecar holding grid and domain: "y.csv" -> "y.meta.json".
std::string meta_path(const std::string& csv_path);

// CSV with header "id,g1,...,gK" and one row per curve (ids from 1), plus the
// meta.json sidecar. Reading requires both files.
std::string sample_to_csv(const FunctionalSample& sample);
void write_sample(const std::string& csv_path, const FunctionalSample& sample);
FunctionalSample read_sample(const std::string& csv_path);

// Parses the CSV body only; header must be id,g1..gK.
Eigen::MatrixXd parse_sample_csv(const std::string& text, const std::string& source);

nlohmann::json grid_meta(const FunctionalSample& sample);

// Point prediction, or three stacked blocks for an interval, each row
// "block,id,g1..gK".
struct PredictionBlock {
  std::string name;
  Eigen::MatrixXd values;
};
std::string prediction_to_csv(const std::vector<PredictionBlock>& blocks);

nlohmann::json fit_to_json(const QuantileFit& fit);
QuantileFit fit_from_json(const nlohmann::json& j);
void save_fit(const std::string& path, const QuantileFit& fit);
QuantileFit load_fit(const std::string& path);

// True alpha on the t-grid, beta on t x s, and the outlier indices.
nlohmann::json truth_to_json(const DgpSpec& spec, std::uint64_t replicate,
                             const SimulatedData& data);

// lambda1,lambda2,bic,converged,error
std::string bic_table_csv(const std::vector<BicCell>& cells);

}  // namespace pflqr
