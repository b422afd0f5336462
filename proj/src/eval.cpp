#include "unip/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "unip/errors.hpp"

namespace unip {

namespace {
using Clock = std::chrono::steady_clock;

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace

std::string config_hash(const std::string& canonical) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << kReportVersionLine << '\n';
  os << "model_id,split,attack_id,accuracy,fooling_ratio,n_samples,seed,"
        "wall_clock_s,config_hash\n";
  for (const EvalRow& r : report.rows) {
    os << r.model_id << ',' << r.split << ',' << r.attack_id << ','
       << fmt(r.accuracy) << ',' << fmt(r.fooling) << ',' << r.n_samples << ','
       << r.seed << ',' << fmt(r.wall_clock_s) << ',' << r.cfg_hash << '\n';
  }
  if (!os) throw DataError("report write failed: " + path);
}

EvalRow evaluate(const Model& m, const Dataset& ds, const Tensor& delta,
                 const std::string& model_id, const std::string& attack_id,
                 std::uint64_t seed) {
  if (delta.size() &&
      delta.shape() != ds.example_shape()) {
    throw UsageError("perturbation shape " + shape_str(delta.shape()) +
                     " does not match dataset examples " +
                     shape_str(ds.example_shape()));
  }
  const auto t0 = Clock::now();
  EvalRow row;
  row.model_id = model_id;
  row.split = ds.split == Split::kTrain ? "train" : "val";
  row.attack_id = attack_id;
  row.accuracy = accuracy_under_delta(m, ds, delta, true);
  row.fooling = delta.size() ? fooling_ratio(m, ds, delta, true) : 0.0;
  row.n_samples = ds.size();
  row.seed = seed;
  row.wall_clock_s = std::chrono::duration<double>(Clock::now() - t0).count();
  row.cfg_hash = config_hash(model_id + "|" + attack_id + "|" +
                             std::to_string(seed) + "|" +
                             std::to_string(ds.size()));
  return row;
}

TransferMatrix transfer_matrix(const std::vector<const Model*>& models,
                               const std::vector<std::string>& names,
                               const Dataset& ds, const PgdSpec& attack,
                               std::uint64_t seed) {
  if (models.size() < 2 || models.size() != names.size()) {
    throw UsageError("transfer matrix needs >= 2 models with names");
  }
  const std::size_t n = models.size();
  TransferMatrix tm;
  tm.names = names;
  tm.acc.assign(n, std::vector<double>(n,
                 std::numeric_limits<double>::quiet_NaN()));

  constexpr std::size_t kChunk = 256;
  for (std::size_t src = 0; src < n; ++src) {
    // Craft once per source model, evaluate all other targets on it.
    std::vector<std::size_t> hits(n, 0);
    Rng rng(mix_seed(seed, src));
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ds.size(); start += kChunk) {
      const std::size_t end = std::min(start + kChunk, ds.size());
      idx.resize(end - start);
      for (std::size_t i = start; i < end; ++i) idx[i - start] = i;
      Batch b = gather(ds, idx);
      const Tensor x_adv =
          pgd(*models[src], b.images, b.labels, attack.eps, attack.steps,
              attack.step_size, attack.random_start, rng);
      for (std::size_t tgt = 0; tgt < n; ++tgt) {
        if (tgt == src) continue;
        const std::vector<int> pred = argmax_rows(forward(*models[tgt], x_adv));
        for (std::size_t i = 0; i < pred.size(); ++i) {
          if (pred[i] == b.labels[i]) ++hits[tgt];
        }
      }
    }
    for (std::size_t tgt = 0; tgt < n; ++tgt) {
      if (tgt == src) continue;
      tm.acc[tgt][src] =
          static_cast<double>(hits[tgt]) / static_cast<double>(ds.size());
    }
  }

  tm.average.assign(n, 0.0);
  for (std::size_t src = 0; src < n; ++src) {
    double sum = 0.0;
    for (std::size_t tgt = 0; tgt < n; ++tgt) {
      if (tgt != src) sum += tm.acc[tgt][src];
    }
    tm.average[src] = sum / static_cast<double>(n - 1);
  }
  return tm;
}

void write_transfer_csv(const std::string& path, const TransferMatrix& tm) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << kReportVersionLine << '\n';
  os << "target\\source";
  for (const std::string& nm : tm.names) os << ',' << nm;
  os << '\n';
  for (std::size_t t = 0; t < tm.names.size(); ++t) {
    os << tm.names[t];
    for (std::size_t s = 0; s < tm.names.size(); ++s) {
      if (t == s) {
        os << ",-";
      } else {
        os << ',' << fmt(tm.acc[t][s]);
      }
    }
    os << '\n';
  }
  os << "Average";
  for (double v : tm.average) os << ',' << fmt(v);
  os << '\n';
  if (!os) throw DataError("transfer write failed: " + path);
}

ClippingSweep sweep_clipping(const Model& m, const Dataset& attack_pool,
                             const Dataset& val,
                             const std::vector<double>& betas,
                             const std::vector<std::uint64_t>& seeds,
                             const UniversalAttackConfig& base,
                             std::size_t subset_n) {
  const bool has_inf =
      std::any_of(betas.begin(), betas.end(),
                  [](double b) { return std::isinf(b) && b > 0; });
  if (!has_inf) {
    throw UsageError("clipping sweep requires a +inf beta baseline column");
  }
  ClippingSweep sweep;
  sweep.betas = betas;
  for (double beta : betas) {
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (std::uint64_t seed : seeds) {
      const Dataset sub = subset(attack_pool, subset_n, seed);
      UniversalAttackConfig cfg = base;
      cfg.beta = beta;
      cfg.seed = seed;
      const UniversalAttackResult r = universal_attack(m, sub, cfg);
      const double acc = accuracy_under_delta(m, val, r.state.delta, true);
      sweep.cells.push_back({beta, seed, acc});
      sum += acc;
      mn = std::min(mn, acc);
      mx = std::max(mx, acc);
    }
    sweep.mean_acc.push_back(sum / static_cast<double>(seeds.size()));
    sweep.min_acc.push_back(mn);
    sweep.max_acc.push_back(mx);
  }
  return sweep;
}

void write_clipping_csv(const std::string& path, const ClippingSweep& sweep) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << kReportVersionLine << '\n';
  os << "beta,mean_attacked_acc,min_attacked_acc,max_attacked_acc\n";
  for (std::size_t i = 0; i < sweep.betas.size(); ++i) {
    os << fmt(sweep.betas[i]) << ',' << fmt(sweep.mean_acc[i]) << ','
       << fmt(sweep.min_acc[i]) << ',' << fmt(sweep.max_acc[i]) << '\n';
  }
  if (!os) throw DataError("clipping sweep write failed: " + path);
}

std::size_t epochs_for_data_size(std::size_t n) {
  if (n <= 500) return 100;
  if (n <= 2000) return 40;
  return 10;
}

std::vector<DataSizeCell> sweep_data_size(const Model& m, const Dataset& train,
                                          const Dataset& val,
                                          const std::vector<std::size_t>& sizes,
                                          const UniversalAttackConfig& base,
                                          std::uint64_t seed) {
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) {
      throw UsageError("data-size sweep sizes must be ascending");
    }
  }
  std::vector<DataSizeCell> out;
  for (std::size_t n : sizes) {
    const Dataset sub = subset(train, n, seed);  // throws if n > N
    UniversalAttackConfig cfg = base;
    cfg.epochs = epochs_for_data_size(n);
    cfg.seed = seed;
    const UniversalAttackResult r = universal_attack(m, sub, cfg);
    out.push_back({n, cfg.epochs,
                   accuracy_under_delta(m, val, r.state.delta, true)});
  }
  return out;
}

void write_data_size_csv(const std::string& path,
                         const std::vector<DataSizeCell>& cells) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << kReportVersionLine << '\n';
  os << "n_samples,epochs,attacked_acc\n";
  for (const DataSizeCell& c : cells) {
    os << c.size << ',' << c.epochs << ',' << fmt(c.attacked_acc) << '\n';
  }
  if (!os) throw DataError("data-size sweep write failed: " + path);
}

}  // namespace unip
