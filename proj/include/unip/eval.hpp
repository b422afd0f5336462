#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "unip/attacks.hpp"
#include "unip/data.hpp"
#include "unip/nn.hpp"

namespace unip {

// FNV-1a over the canonical config string, hex-encoded; ties report rows to
// the exact settings that produced them.
std::string config_hash(const std::string& canonical);

struct EvalRow {
  std::string model_id;
  std::string split;
  std::string attack_id;
  double accuracy = 0.0;
  double fooling = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double wall_clock_s = 0.0;
  std::string cfg_hash;
};

struct EvalReport {
  std::vector<EvalRow> rows;
};

// CSV, first line a versioned comment, second the column header.
inline constexpr const char* kReportVersionLine = "# unip-report v1";
void write_report_csv(const std::string& path, const EvalReport& report);

// Accuracy plus fooling ratio under a shared perturbation (empty delta means
// clean). Inputs are clamped to the pixel domain.
EvalRow evaluate(const Model& m, const Dataset& ds, const Tensor& delta,
                 const std::string& model_id, const std::string& attack_id,
                 std::uint64_t seed);

// Cross-model transfer of per-instance PGD examples.
struct PgdSpec {
  double eps = 8.0 / 255.0;
  int steps = 20;
  double step_size = 2.0 / 255.0;
  bool random_start = true;
};

struct TransferMatrix {
  std::vector<std::string> names;
  // acc[target][source]; the diagonal (white-box) is NaN / omitted in CSV
  std::vector<std::vector<double>> acc;
  std::vector<double> average;  // per-source column mean over off-diagonal rows
};

TransferMatrix transfer_matrix(const std::vector<const Model*>& models,
                               const std::vector<std::string>& names,
                               const Dataset& ds, const PgdSpec& attack,
                               std::uint64_t seed);
void write_transfer_csv(const std::string& path, const TransferMatrix& tm);

// Loss-clipping ablation: per (beta, seed) regenerate the universal attack on
// a fresh data subset and record attacked validation accuracy.
struct ClippingCell {
  double beta = 0.0;
  std::uint64_t seed = 0;
  double attacked_acc = 0.0;
};

struct ClippingSweep {
  std::vector<ClippingCell> cells;
  std::vector<double> betas;
  std::vector<double> mean_acc;  // aligned with betas
  std::vector<double> min_acc;
  std::vector<double> max_acc;
};

ClippingSweep sweep_clipping(const Model& m, const Dataset& attack_pool,
                             const Dataset& val,
                             const std::vector<double>& betas,
                             const std::vector<std::uint64_t>& seeds,
                             const UniversalAttackConfig& base,
                             std::size_t subset_n);
void write_clipping_csv(const std::string& path, const ClippingSweep& sweep);

// Attack strength versus attack-set size, with the matching epoch scaling.
std::size_t epochs_for_data_size(std::size_t n);  // 100 / 40 / 10

struct DataSizeCell {
  std::size_t size = 0;
  std::size_t epochs = 0;
  double attacked_acc = 0.0;
};

std::vector<DataSizeCell> sweep_data_size(const Model& m, const Dataset& train,
                                          const Dataset& val,
                                          const std::vector<std::size_t>& sizes,
                                          const UniversalAttackConfig& base,
                                          std::uint64_t seed);
void write_data_size_csv(const std::string& path,
                         const std::vector<DataSizeCell>& cells);

}  // namespace unip
