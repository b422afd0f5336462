#include "support/fixtures.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "support/synth.hpp"
#include "unip/checkpoint.hpp"
#include "unip/presets.hpp"
#include "unip/training.hpp"

namespace fs = std::filesystem;

namespace unip::test {

namespace {
constexpr const char* kSynthDir = "testdata_synth";
constexpr const char* kFixtureModelFile = "testdata_synth/fixture_lenet_v1.unip";
constexpr const char* kNarrowModelFile = "testdata_synth/narrow_net_v1.unip";

std::string mnist_file(const std::string& root, const std::string& name) {
  for (const std::string& rel : {"mnist/" + name, name}) {
    const fs::path p = fs::path(root) / rel;
    if (fs::exists(p)) return p.string();
  }
  return {};
}
}  // namespace

const DataFixture& synth_fixture() {
  static const DataFixture fx = [] {
    DataFixture f;
    f.dir = ensure_synth_mnist_dir(kSynthDir);
    f.train = load_mnist(f.dir + std::string("/train-images-idx3-ubyte"),
                         f.dir + std::string("/train-labels-idx1-ubyte"),
                         Split::kTrain);
    f.val = load_mnist(f.dir + std::string("/t10k-images-idx3-ubyte"),
                       f.dir + std::string("/t10k-labels-idx1-ubyte"),
                       Split::kVal);
    return f;
  }();
  return fx;
}

const DataFixture& acceptance_fixture() {
  static const DataFixture fx = [] {
    if (const char* env = std::getenv("UNIP_DATA_DIR")) {
      const std::string ti = mnist_file(env, "train-images-idx3-ubyte");
      const std::string tl = mnist_file(env, "train-labels-idx1-ubyte");
      const std::string vi = mnist_file(env, "t10k-images-idx3-ubyte");
      const std::string vl = mnist_file(env, "t10k-labels-idx1-ubyte");
      if (!ti.empty() && !tl.empty() && !vi.empty() && !vl.empty()) {
        DataFixture f;
        f.train = load_mnist(ti, tl, Split::kTrain);
        f.val = load_mnist(vi, vl, Split::kVal);
        f.dir = env;
        f.real = true;
        std::cout << "using real MNIST from " << env << "\n";
        return f;
      }
    }
    return synth_fixture();
  }();
  return fx;
}

const Model& fixture_model() {
  static const Model m = [] {
    Model model = make_lenet(11);
    if (fs::exists(kFixtureModelFile)) {
      load_model_params(kFixtureModelFile, model);
      return model;
    }
    const DataFixture& fx = synth_fixture();
    TrainConfig cfg;
    cfg.total_steps = 700;
    cfg.batch_size = 64;
    cfg.lr_schedule = {{0, 0.05}, {500, 0.01}};
    cfg.seed = 11;
    TrainResult r = train_natural(model, fx.train, cfg);
    save_model_params(kFixtureModelFile, r.model);
    return r.model;
  }();
  return m;
}

Model make_narrow_net(std::uint64_t seed) {
  std::vector<LayerSpec> layers = {
      LayerSpec::conv2d(1, 4, 5, 1, 2),  LayerSpec::relu(),
      LayerSpec::maxpool2x2(),           LayerSpec::conv2d(4, 8, 5, 1, 2),
      LayerSpec::relu(),                 LayerSpec::maxpool2x2(),
      LayerSpec::flatten(),              LayerSpec::dense(8 * 7 * 7, 64),
      LayerSpec::relu(),                 LayerSpec::dense(64, 10),
  };
  return make_model<float>(std::move(layers), {1, 28, 28}, 10, seed);
}

const Model& narrow_fixture_model() {
  static const Model m = [] {
    Model model = make_narrow_net(13);
    if (fs::exists(kNarrowModelFile)) {
      load_model_params(kNarrowModelFile, model);
      return model;
    }
    const DataFixture& fx = synth_fixture();
    TrainConfig cfg;
    cfg.total_steps = 500;
    cfg.batch_size = 64;
    cfg.lr_schedule = {{0, 0.05}, {350, 0.01}};
    cfg.seed = 13;
    TrainResult r = train_natural(model, fx.train, cfg);
    save_model_params(kNarrowModelFile, r.model);
    return r.model;
  }();
  return m;
}

}  // namespace unip::test
