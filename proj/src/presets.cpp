#include "unip/presets.hpp"

#include "unip/errors.hpp"

namespace unip {

Model make_lenet(std::uint64_t seed) {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(1, 8, 5, 1, 2),   LayerSpec::relu(),
      LayerSpec::maxpool2x2(),            LayerSpec::conv2d(8, 16, 5, 1, 2),
      LayerSpec::relu(),                  LayerSpec::maxpool2x2(),
      LayerSpec::flatten(),               LayerSpec::dense(16 * 7 * 7, 128),
      LayerSpec::relu(),                  LayerSpec::dense(128, 10),
  };
  return make_model<float>(std::move(layers), {1, 28, 28}, 10, seed);
}

Model make_smallconv_cifar(std::uint64_t seed) {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(3, 16, 3, 1, 1),  LayerSpec::relu(),
      LayerSpec::maxpool2x2(),            LayerSpec::conv2d(16, 32, 3, 1, 1),
      LayerSpec::relu(),                  LayerSpec::maxpool2x2(),
      LayerSpec::conv2d(32, 32, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::conv2d(32, 32, 3, 1, 1), LayerSpec::relu(),
      LayerSpec::maxpool2x2(),            LayerSpec::flatten(),
      LayerSpec::dense(32 * 4 * 4, 128),  LayerSpec::relu(),
      LayerSpec::dense(128, 10),
  };
  return make_model<float>(std::move(layers), {3, 32, 32}, 10, seed);
}

Model make_preset(const std::string& name, std::uint64_t seed) {
  if (name == "lenet") return make_lenet(seed);
  if (name == "smallconv_cifar") return make_smallconv_cifar(seed);
  throw UsageError("unknown preset '" + name +
                   "' (expected lenet|smallconv_cifar)");
}

TrainConfig default_mnist_train() {
  TrainConfig cfg;
  cfg.total_steps = 6000;
  cfg.batch_size = 128;
  cfg.lr_schedule = {{0, 0.05}, {4000, 0.005}};
  cfg.momentum = 0.9;
  return cfg;
}

TrainConfig default_cifar_train() {
  TrainConfig cfg;
  cfg.total_steps = 20000;
  cfg.batch_size = 128;
  cfg.lr_schedule = {{0, 0.1}, {10000, 0.01}};
  cfg.momentum = 0.9;
  return cfg;
}

TrainConfig default_train_for(const std::string& preset) {
  if (preset == "lenet") return default_mnist_train();
  if (preset == "smallconv_cifar") return default_cifar_train();
  throw UsageError("unknown preset '" + preset + "'");
}

}  // namespace unip
