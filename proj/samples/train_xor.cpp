// Fits XOR with a 2-8-1 tanh/sigmoid network and prints predictions.

#include <cstdio>

#include "tensorlite/nn.hpp"
#include "tensorlite/optim.hpp"

int main() {
    using namespace tensorlite;

    nn::Sequential net;
    net.emplace<nn::Dense>(2, 8, /*seed=*/1);
    net.emplace<nn::ActivationLayer>(nn::Activation::tanh);
    net.emplace<nn::Dense>(8, 1, /*seed=*/2);
    net.emplace<nn::ActivationLayer>(nn::Activation::sigmoid);

    const auto x = Tensor::from_values(Shape{4, 2}, {0, 0, 0, 1, 1, 0, 1, 1});
    const auto y = Tensor::from_values(Shape{4, 1}, {0, 1, 1, 0});

    optim::Sgd opt({.lr = 0.5f});
    const auto params = net.parameters();
    for (int epoch = 0; epoch <= 3000; ++epoch) {
        autograd::reset_tape();
        const auto loss = nn::mse(net(x), y);
        if (epoch % 500 == 0) std::printf("epoch %4d  loss %.6f\n", epoch, loss.item());
        opt.step(params, autograd::backward(loss));
    }

    autograd::NoGradGuard no_grad;
    const auto out = net(x).to_vector();
    for (int i = 0; i < 4; ++i)
        std::printf("%g xor %g -> %.3f\n", x.at({i, 0}), x.at({i, 1}), out[static_cast<std::size_t>(i)]);
}
