#include "unip/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "CLI11.hpp"
#include "unip/attacks.hpp"
#include "unip/checkpoint.hpp"
#include "unip/data.hpp"
#include "unip/errors.hpp"
#include "unip/eval.hpp"
#include "unip/netpbm.hpp"
#include "unip/presets.hpp"
#include "unip/training.hpp"

namespace fs = std::filesystem;

namespace unip {
namespace {

struct CommonOpts {
  std::string preset = "lenet";
  std::string data = "mnist";
  std::string data_dir;
  std::string out = "run_out";
  std::uint64_t seed = 0;
  double pixels = 1.0;
  bool deterministic = true;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  sub->add_option("--preset", c.preset, "model architecture")
      ->check(CLI::IsMember({"lenet", "smallconv_cifar"}))
      ->capture_default_str();
  sub->add_option("--data", c.data, "dataset")
      ->check(CLI::IsMember({"mnist", "cifar10"}))
      ->capture_default_str();
  sub->add_option("--data-dir", c.data_dir,
                  "dataset root (default $UNIP_DATA_DIR or .)");
  sub->add_option("--out", c.out, "output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "base RNG seed")->capture_default_str();
  sub->add_option("--pixels", c.pixels,
                  "pixel scale for --eps and perturbation step sizes")
      ->check(CLI::IsMember({1.0, 255.0}))
      ->capture_default_str();
  sub->add_flag("--deterministic,!--no-deterministic", c.deterministic,
                "kept for config compatibility; runs are always "
                "deterministic (single-threaded numerics)")
      ->capture_default_str();
}

std::string resolved_data_dir(const CommonOpts& c) {
  if (!c.data_dir.empty()) return c.data_dir;
  if (const char* env = std::getenv("UNIP_DATA_DIR")) return env;
  return ".";
}

std::string find_file(const std::string& root,
                      const std::vector<std::string>& candidates) {
  for (const std::string& rel : candidates) {
    const fs::path p = fs::path(root) / rel;
    if (fs::exists(p)) return p.string();
  }
  std::string msg = "no dataset file found under " + root + " (tried";
  for (const std::string& rel : candidates) msg += " " + rel;
  throw DataError(msg + ")");
}

Dataset load_dataset(const CommonOpts& c, Split split) {
  const std::string root = resolved_data_dir(c);
  if (c.data == "mnist") {
    const bool train = split == Split::kTrain;
    const std::string img_name =
        train ? "train-images-idx3-ubyte" : "t10k-images-idx3-ubyte";
    const std::string lab_name =
        train ? "train-labels-idx1-ubyte" : "t10k-labels-idx1-ubyte";
    const std::string img =
        find_file(root, {"mnist/" + img_name, img_name,
                         "mnist/" + img_name + ".idx", img_name + ".idx"});
    const std::string lab =
        find_file(root, {"mnist/" + lab_name, lab_name,
                         "mnist/" + lab_name + ".idx", lab_name + ".idx"});
    return load_mnist(img, lab, split);
  }
  const fs::path sub = fs::path(root) / "cifar-10-batches-bin";
  return load_cifar10(fs::exists(sub) ? sub.string() : root, split);
}

void prepare_out(const std::string& out) {
  for (const char* d : {"", "checkpoints", "perturbations", "reports",
                        "images"}) {
    fs::create_directories(fs::path(out) / d);
  }
}

void echo_config(const CLI::App& root, const std::string& out) {
  std::ofstream os(fs::path(out) / "config.echo");
  if (!os) throw DataError("cannot write config echo under " + out);
  os << "# replay with: unip --config config.echo\n";
  // explicitly-set flags only: echoed defaults would re-trigger the
  // mode-compatibility checks on replay
  os << root.config_to_str(false, false);
}

Model load_model(const CommonOpts& c, const std::string& checkpoint) {
  Model m = make_preset(c.preset, c.seed);
  if (!checkpoint.empty()) load_model_params(checkpoint, m);
  return m;
}

void reject_unless(const CLI::App* sub, const char* flag, bool ok,
                   const std::string& why) {
  if (sub->count(flag) > 0 && !ok) {
    throw UsageError(std::string(flag) + " is not valid " + why);
  }
}

std::string image_path(const std::string& out, const Tensor& delta) {
  const char* ext = delta.dim(0) == 1 ? "delta.pgm" : "delta.ppm";
  return (fs::path(out) / "images" / ext).string();
}

void write_attack_trace(const std::string& path,
                        const std::vector<AttackIterRecord>& trace) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "iter,batch_acc,mean_loss\n";
  for (const AttackIterRecord& r : trace) {
    os << r.iter << ',' << r.batch_acc << ',' << r.mean_loss << '\n';
  }
}

void write_pass_trace(const std::string& path,
                      const std::vector<double>& ratios) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << "pass,fooling_ratio\n";
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    os << (i + 1) << ',' << ratios[i] << '\n';
  }
}

std::vector<double> parse_double_list(const std::string& csv,
                                      const char* flag) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "inf" || tok == "+inf") {
      out.push_back(std::numeric_limits<double>::infinity());
    } else {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw UsageError(std::string(flag) + ": cannot parse '" + tok + "'");
      }
    }
  }
  if (out.empty()) throw UsageError(std::string(flag) + ": empty list");
  return out;
}

std::vector<LrPoint> parse_schedule(const std::string& s) {
  // "0:0.05,4000:0.005"
  std::vector<LrPoint> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const std::size_t colon = tok.find(':');
    if (colon == std::string::npos) {
      throw UsageError("--schedule entries are step:lr, got '" + tok + "'");
    }
    try {
      out.push_back({static_cast<std::size_t>(std::stoull(tok.substr(0, colon))),
                     std::stod(tok.substr(colon + 1))});
    } catch (const std::exception&) {
      throw UsageError("--schedule: cannot parse '" + tok + "'");
    }
  }
  if (out.empty()) throw UsageError("--schedule: empty");
  return out;
}

// ---- subcommand wiring -----------------------------------------------------

struct TrainOpts {
  CommonOpts common;
  std::string mode = "natural";
  std::size_t steps = 0;  // 0: preset default
  std::size_t batch = 0;  // 0: preset default
  std::string schedule;
  double momentum = 0.9;
  double eps = 0.0;
  std::string norm = "inf";
  std::string delta_rule = "sign";
  double delta_lr = 1.0;
  bool delta_random_init = false;
  int pgd_steps = 7;
  double pgd_step_size = 0.0;
  double rfgsm_alpha = 0.0;
};

void run_train(const CLI::App& root, const CLI::App* sub, TrainOpts& o) {
  const TrainMode mode = parse_train_mode(o.mode);
  const bool universal =
      mode == TrainMode::kUniversalAlt || mode == TrainMode::kUniversalSim;
  const bool adversarial = mode != TrainMode::kNatural;
  reject_unless(sub, "--eps", adversarial, "with --mode natural");
  reject_unless(sub, "--norm", adversarial, "with --mode natural");
  reject_unless(sub, "--delta-rule", universal, "outside universal modes");
  reject_unless(sub, "--delta-lr", universal, "outside universal modes");
  reject_unless(sub, "--delta-random-init", universal,
                "outside universal modes");
  reject_unless(sub, "--pgd-steps", mode == TrainMode::kAdvPgd,
                "without --mode adv_pgd");
  reject_unless(sub, "--pgd-step-size", mode == TrainMode::kAdvPgd,
                "without --mode adv_pgd");
  reject_unless(sub, "--rfgsm-alpha", mode == TrainMode::kAdvRfgsm,
                "without --mode adv_rfgsm");

  prepare_out(o.common.out);
  echo_config(root, o.common.out);

  TrainConfig cfg = default_train_for(o.common.preset);
  cfg.mode = mode;
  if (o.steps) cfg.total_steps = o.steps;
  if (o.batch) cfg.batch_size = o.batch;
  if (!o.schedule.empty()) cfg.lr_schedule = parse_schedule(o.schedule);
  cfg.momentum = o.momentum;
  cfg.seed = o.common.seed;
  cfg.ball = {parse_norm(o.norm), o.eps / o.common.pixels};
  cfg.delta_rule = parse_update_rule(o.delta_rule);
  cfg.delta_lr = o.delta_lr / o.common.pixels;
  cfg.delta_random_init = o.delta_random_init;
  cfg.pgd_steps = o.pgd_steps;
  cfg.pgd_step_size = o.pgd_step_size / o.common.pixels;
  cfg.rfgsm_alpha = o.rfgsm_alpha / o.common.pixels;
  cfg.checkpoint_dir = (fs::path(o.common.out) / "checkpoints").string();

  const Dataset train_ds = load_dataset(o.common, Split::kTrain);
  const Dataset val_ds = load_dataset(o.common, Split::kVal);
  Model init = make_preset(o.common.preset, o.common.seed);

  TrainResult r = train(init, train_ds, cfg);
  write_trace_csv(
      (fs::path(o.common.out) / "reports" / "train_trace.csv").string(),
      r.trace);

  EvalReport report;
  const std::string model_id = o.common.preset + ":" + o.mode;
  report.rows.push_back(
      evaluate(r.model, val_ds, Tensor{}, model_id, "clean", cfg.seed));
  if (universal) {
    save_perturbation(
        (fs::path(o.common.out) / "perturbations" / "delta_final.unip")
            .string(),
        r.perturbation);
    export_perturbation_image(r.perturbation.delta, r.perturbation.ball,
                              image_path(o.common.out, r.perturbation.delta));
    report.rows.push_back(evaluate(r.model, val_ds, r.perturbation.delta,
                                   model_id, "train_delta", cfg.seed));
  }
  write_report_csv(
      (fs::path(o.common.out) / "reports" / "eval.csv").string(), report);

  std::cout << "trained " << model_id << ": steps=" << cfg.total_steps
            << " clean_val_acc=" << report.rows[0].accuracy
            << " wall_clock_s=" << r.trace.wall_clock_s << '\n'
            << "artifacts under " << o.common.out << '\n';
}

struct AttackOpts {
  CommonOpts common;
  std::string checkpoint;
  std::string method = "universal";
  std::string rule = "sign";
  double lr = 1.0;
  double beta = 9.0;
  std::size_t epochs = 10;
  std::size_t batch = 128;
  std::size_t n = 5000;
  double eps = 0.0;
  std::string norm = "inf";
  bool no_clamp = false;
  double xi = 0.01;
  std::size_t max_passes = 10;
  int df_max_iter = 50;
  double overshoot = 0.02;
};

void run_attack(const CLI::App& root, const CLI::App* sub, AttackOpts& o) {
  const bool universal = o.method == "universal";
  reject_unless(sub, "--rule", universal, "with --method ideepfool");
  reject_unless(sub, "--lr", universal, "with --method ideepfool");
  reject_unless(sub, "--beta", universal, "with --method ideepfool");
  reject_unless(sub, "--epochs", universal, "with --method ideepfool");
  reject_unless(sub, "--batch", universal, "with --method ideepfool");
  reject_unless(sub, "--xi", !universal, "with --method universal");
  reject_unless(sub, "--max-passes", !universal, "with --method universal");
  reject_unless(sub, "--df-max-iter", !universal, "with --method universal");
  reject_unless(sub, "--overshoot", !universal, "with --method universal");
  if (!(o.eps > 0.0)) throw UsageError("--eps must be positive");

  prepare_out(o.common.out);
  echo_config(root, o.common.out);

  const Model model = load_model(o.common, o.checkpoint);
  const Dataset train_ds = load_dataset(o.common, Split::kTrain);
  const Dataset val_ds = load_dataset(o.common, Split::kVal);
  const Dataset pool = (o.n > 0 && o.n < train_ds.size())
                           ? subset(train_ds, o.n, o.common.seed)
                           : train_ds;

  const NormBall ball{parse_norm(o.norm), o.eps / o.common.pixels};
  PerturbationState st;
  double wall = 0.0;
  std::string attack_id;

  if (universal) {
    UniversalAttackConfig cfg;
    cfg.ball = ball;
    cfg.rule = parse_update_rule(o.rule);
    cfg.lr = o.lr / o.common.pixels;
    cfg.beta = o.beta;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch;
    cfg.seed = o.common.seed;
    cfg.clamp_inputs = !o.no_clamp;
    UniversalAttackResult r = universal_attack(model, pool, cfg);
    st = std::move(r.state);
    wall = r.wall_clock_s;
    attack_id = "universal_" + o.rule;
    write_attack_trace(
        (fs::path(o.common.out) / "reports" / "attack_trace.csv").string(),
        r.trace);
  } else if (o.method == "ideepfool") {
    IDeepFoolConfig cfg;
    cfg.ball = ball;
    cfg.xi = o.xi;
    cfg.max_outer_passes = o.max_passes;
    cfg.deepfool_max_iter = o.df_max_iter;
    cfg.overshoot = o.overshoot;
    IDeepFoolResult r = ideepfool_universal(model, pool, cfg);
    st = std::move(r.state);
    wall = r.wall_clock_s;
    attack_id = "ideepfool";
    write_pass_trace(
        (fs::path(o.common.out) / "reports" / "attack_trace.csv").string(),
        r.pass_fooling_ratio);
  } else {
    throw UsageError("--method must be universal or ideepfool");
  }

  save_perturbation(
      (fs::path(o.common.out) / "perturbations" / "delta.unip").string(), st);
  export_perturbation_image(st.delta, st.ball,
                            image_path(o.common.out, st.delta));

  const std::string model_id =
      o.common.preset +
      (o.checkpoint.empty() ? "" : ":" + fs::path(o.checkpoint).stem().string());
  EvalReport report;
  report.rows.push_back(
      evaluate(model, val_ds, Tensor{}, model_id, "clean", o.common.seed));
  EvalRow attacked =
      evaluate(model, val_ds, st.delta, model_id, attack_id, o.common.seed);
  attacked.wall_clock_s = wall;  // generation cost, the number that matters
  report.rows.push_back(attacked);
  write_report_csv(
      (fs::path(o.common.out) / "reports" / "eval.csv").string(), report);

  std::cout << attack_id << " on " << model_id << ": n=" << pool.size()
            << " clean_val_acc=" << report.rows[0].accuracy
            << " attacked_val_acc=" << attacked.accuracy
            << " fooling_ratio=" << attacked.fooling
            << " wall_clock_s=" << wall << '\n'
            << "artifacts under " << o.common.out << '\n';
}

struct EvalOpts {
  CommonOpts common;
  std::string checkpoint;
  std::string perturbation;
  std::string split = "val";
};

void run_eval(const CLI::App& root, EvalOpts& o) {
  prepare_out(o.common.out);
  echo_config(root, o.common.out);
  const Model model = load_model(o.common, o.checkpoint);
  const Dataset ds = load_dataset(
      o.common, o.split == "train" ? Split::kTrain : Split::kVal);
  const std::string model_id =
      o.common.preset +
      (o.checkpoint.empty() ? "" : ":" + fs::path(o.checkpoint).stem().string());

  EvalReport report;
  report.rows.push_back(
      evaluate(model, ds, Tensor{}, model_id, "clean", o.common.seed));
  if (!o.perturbation.empty()) {
    const PerturbationState st = load_perturbation(o.perturbation);
    report.rows.push_back(evaluate(model, ds, st.delta, model_id,
                                   "perturbation:" +
                                       fs::path(o.perturbation).stem().string(),
                                   o.common.seed));
  }
  write_report_csv(
      (fs::path(o.common.out) / "reports" / "eval.csv").string(), report);
  for (const EvalRow& r : report.rows) {
    std::cout << r.attack_id << ": acc=" << r.accuracy
              << " fooling=" << r.fooling << '\n';
  }
}

struct SweepOpts {
  CommonOpts common;
  std::string checkpoint;
  std::string kind = "clipping";
  std::string betas = "3,6,9,inf";
  std::string seeds = "1,2,3,4,5";
  std::string sizes = "500,1000,5000";
  std::size_t n = 1000;
  std::string rule = "sign";
  double lr = 1.0;
  double eps = 0.0;
  std::string norm = "inf";
  std::size_t epochs = 10;
  std::size_t batch = 128;
};

void run_sweep(const CLI::App& root, const CLI::App* sub, SweepOpts& o) {
  const bool clipping = o.kind == "clipping";
  if (!clipping && o.kind != "datasize") {
    throw UsageError("--kind must be clipping or datasize");
  }
  reject_unless(sub, "--betas", clipping, "with --kind datasize");
  reject_unless(sub, "--seeds", clipping, "with --kind datasize");
  reject_unless(sub, "--n", clipping, "with --kind datasize");
  reject_unless(sub, "--sizes", !clipping, "with --kind clipping");
  if (!(o.eps > 0.0)) throw UsageError("--eps must be positive");

  prepare_out(o.common.out);
  echo_config(root, o.common.out);
  const Model model = load_model(o.common, o.checkpoint);
  const Dataset train_ds = load_dataset(o.common, Split::kTrain);
  const Dataset val_ds = load_dataset(o.common, Split::kVal);

  UniversalAttackConfig base;
  base.ball = {parse_norm(o.norm), o.eps / o.common.pixels};
  base.rule = parse_update_rule(o.rule);
  base.lr = o.lr / o.common.pixels;
  base.epochs = o.epochs;
  base.batch_size = o.batch;

  if (clipping) {
    const std::vector<double> betas = parse_double_list(o.betas, "--betas");
    std::vector<std::uint64_t> seeds;
    for (double s : parse_double_list(o.seeds, "--seeds")) {
      seeds.push_back(static_cast<std::uint64_t>(s));
    }
    const ClippingSweep sweep =
        sweep_clipping(model, train_ds, val_ds, betas, seeds, base, o.n);
    const std::string path =
        (fs::path(o.common.out) / "reports" / "clipping.csv").string();
    write_clipping_csv(path, sweep);
    for (std::size_t i = 0; i < sweep.betas.size(); ++i) {
      std::cout << "beta=" << sweep.betas[i]
                << " mean_attacked_acc=" << sweep.mean_acc[i] << '\n';
    }
    std::cout << "wrote " << path << '\n';
  } else {
    std::vector<std::size_t> sizes;
    for (double s : parse_double_list(o.sizes, "--sizes")) {
      sizes.push_back(static_cast<std::size_t>(s));
    }
    const std::vector<DataSizeCell> cells = sweep_data_size(
        model, train_ds, val_ds, sizes, base, o.common.seed);
    const std::string path =
        (fs::path(o.common.out) / "reports" / "datasize.csv").string();
    write_data_size_csv(path, cells);
    for (const DataSizeCell& c : cells) {
      std::cout << "n=" << c.size << " epochs=" << c.epochs
                << " attacked_acc=" << c.attacked_acc << '\n';
    }
    std::cout << "wrote " << path << '\n';
  }
}

struct ExportOpts {
  CommonOpts common;
  std::string perturbation;
};

void run_export(const CLI::App& root, ExportOpts& o) {
  prepare_out(o.common.out);
  echo_config(root, o.common.out);
  const PerturbationState st = load_perturbation(o.perturbation);
  const std::string path = image_path(o.common.out, st.delta);
  export_perturbation_image(st.delta, st.ball, path);
  std::cout << "wrote " << path << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{
      "unip: universal adversarial perturbations and hardened training"};
  app.require_subcommand(0, 1);
  app.set_config("--config", "", "read flags from an echoed config file");
  app.fallthrough(false);

  TrainOpts to;
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model (natural or hardened)");
  train_cmd->configurable();
  add_common(train_cmd, to.common);
  train_cmd->add_option("--mode", to.mode,
                        "natural|adv_fgsm|adv_rfgsm|adv_pgd|universal_alt|"
                        "universal_sim")
      ->capture_default_str();
  train_cmd->add_option("--steps", to.steps, "total steps (0: preset default)");
  train_cmd->add_option("--batch", to.batch, "batch size (0: preset default)");
  train_cmd->add_option("--schedule", to.schedule,
                        "lr schedule step:lr[,step:lr...]");
  train_cmd->add_option("--momentum", to.momentum, "weight momentum")
      ->capture_default_str();
  train_cmd->add_option("--eps", to.eps, "attack budget, in --pixels scale");
  train_cmd->add_option("--norm", to.norm, "ball norm: inf|2")
      ->capture_default_str();
  train_cmd->add_option("--delta-rule", to.delta_rule,
                        "universal ascent rule: sign|sgd|adam")
      ->capture_default_str();
  train_cmd->add_option("--delta-lr", to.delta_lr,
                        "ascent step for sgd/adam delta rules, --pixels scale")
      ->capture_default_str();
  train_cmd->add_flag("--delta-random-init", to.delta_random_init,
                      "start delta uniform in the ball instead of zero");
  train_cmd->add_option("--pgd-steps", to.pgd_steps, "pgd steps per batch")
      ->capture_default_str();
  train_cmd->add_option("--pgd-step-size", to.pgd_step_size,
                        "pgd step size, --pixels scale (0: 2.5*eps/steps)");
  train_cmd->add_option("--rfgsm-alpha", to.rfgsm_alpha,
                        "random step size, --pixels scale (0: eps/2)");

  AttackOpts ao;
  CLI::App* attack_cmd =
      app.add_subcommand("attack", "generate a universal perturbation");
  attack_cmd->configurable();
  add_common(attack_cmd, ao.common);
  attack_cmd->add_option("--checkpoint", ao.checkpoint,
                         "model parameters (UNIP file)");
  attack_cmd->add_option("--method", ao.method, "universal|ideepfool")
      ->capture_default_str();
  attack_cmd->add_option("--rule", ao.rule, "sgd|momentum_sgd|adam|sign")
      ->capture_default_str();
  attack_cmd->add_option("--lr", ao.lr, "ascent step, --pixels scale")
      ->capture_default_str();
  attack_cmd->add_option("--beta", ao.beta, "loss clip (inf disables)")
      ->capture_default_str();
  attack_cmd->add_option("--epochs", ao.epochs, "passes over the attack set")
      ->capture_default_str();
  attack_cmd->add_option("--batch", ao.batch, "minibatch size")
      ->capture_default_str();
  attack_cmd->add_option("--n", ao.n, "attack-set size (0: full train split)")
      ->capture_default_str();
  attack_cmd->add_option("--eps", ao.eps, "ball radius, --pixels scale");
  attack_cmd->add_option("--norm", ao.norm, "ball norm: inf|2")
      ->capture_default_str();
  attack_cmd->add_flag("--no-clamp", ao.no_clamp,
                       "skip clamping x+delta to the pixel domain");
  attack_cmd->add_option("--xi", ao.xi, "fooling tolerance (stop at 1-xi)")
      ->capture_default_str();
  attack_cmd->add_option("--max-passes", ao.max_passes,
                         "outer pass cap")
      ->capture_default_str();
  attack_cmd->add_option("--df-max-iter", ao.df_max_iter,
                         "deepfool iteration cap")
      ->capture_default_str();
  attack_cmd->add_option("--overshoot", ao.overshoot, "deepfool overshoot")
      ->capture_default_str();

  EvalOpts eo;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "accuracy / fooling ratio of a model");
  eval_cmd->configurable();
  add_common(eval_cmd, eo.common);
  eval_cmd->add_option("--checkpoint", eo.checkpoint,
                       "model parameters (UNIP file)");
  eval_cmd->add_option("--perturbation", eo.perturbation,
                       "perturbation artifact to apply");
  eval_cmd->add_option("--split", eo.split, "train|val")
      ->check(CLI::IsMember({"train", "val"}))
      ->capture_default_str();

  SweepOpts so;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "clipping or data-size ablation");
  sweep_cmd->configurable();
  add_common(sweep_cmd, so.common);
  sweep_cmd->add_option("--checkpoint", so.checkpoint,
                        "model parameters (UNIP file)");
  sweep_cmd->add_option("--kind", so.kind, "clipping|datasize")
      ->capture_default_str();
  sweep_cmd->add_option("--betas", so.betas, "comma list, may include inf")
      ->capture_default_str();
  sweep_cmd->add_option("--seeds", so.seeds, "comma list of subset seeds")
      ->capture_default_str();
  sweep_cmd->add_option("--sizes", so.sizes, "comma list, ascending")
      ->capture_default_str();
  sweep_cmd->add_option("--n", so.n, "attack-subset size per clipping cell")
      ->capture_default_str();
  sweep_cmd->add_option("--rule", so.rule, "ascent rule")
      ->capture_default_str();
  sweep_cmd->add_option("--lr", so.lr, "ascent step, --pixels scale")
      ->capture_default_str();
  sweep_cmd->add_option("--eps", so.eps, "ball radius, --pixels scale");
  sweep_cmd->add_option("--norm", so.norm, "ball norm: inf|2")
      ->capture_default_str();
  sweep_cmd->add_option("--epochs", so.epochs, "attack epochs")
      ->capture_default_str();
  sweep_cmd->add_option("--batch", so.batch, "attack batch size")
      ->capture_default_str();

  ExportOpts xo;
  CLI::App* export_cmd =
      app.add_subcommand("export", "render a perturbation to PGM/PPM");
  export_cmd->configurable();
  add_common(export_cmd, xo.common);
  export_cmd->add_option("--perturbation", xo.perturbation,
                         "perturbation artifact (UNIP file)")
      ->required();

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) {
      run_train(app, train_cmd, to);
    } else if (attack_cmd->parsed()) {
      run_attack(app, attack_cmd, ao);
    } else if (eval_cmd->parsed()) {
      run_eval(app, eo);
    } else if (sweep_cmd->parsed()) {
      run_sweep(app, sweep_cmd, so);
    } else if (export_cmd->parsed()) {
      run_export(app, xo);
    } else {
      std::cerr << app.help();
      return 1;
    }
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace unip
