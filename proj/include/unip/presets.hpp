#pragma once

#include <cstdint>
#include <string>

#include "unip/nn.hpp"
#include "unip/training.hpp"

namespace unip {

// lenet, for 28x28 grayscale:
//   conv 1->8 k5 p2, relu, pool -> (8,14,14)
//   conv 8->16 k5 p2, relu, pool -> (16,7,7)
//   flatten -> 784, dense 784->128, relu, dense 128->10
Model make_lenet(std::uint64_t seed);

// smallconv_cifar, for 32x32 RGB:
//   conv 3->16 k3 p1, relu, pool -> (16,16,16)
//   conv 16->32 k3 p1, relu, pool -> (32,8,8)
//   conv 32->32 k3 p1, relu
//   conv 32->32 k3 p1, relu, pool -> (32,4,4)
//   flatten -> 512, dense 512->128, relu, dense 128->10
Model make_smallconv_cifar(std::uint64_t seed);

Model make_preset(const std::string& name, std::uint64_t seed);

// Reference schedules: MNIST 6000 steps with the lr drop at 4000, CIFAR
// 20000 steps with the drop at 10000. Batch 128, momentum 0.9.
TrainConfig default_mnist_train();
TrainConfig default_cifar_train();
TrainConfig default_train_for(const std::string& preset);

}  // namespace unip
