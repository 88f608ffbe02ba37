#pragma once

#include <cstdint>
#include <stdexcept>

namespace dialsum {
namespace train {

struct TrainConfig {
    std::size_t batch_size = 32;
    double learning_rate = 0.001;
    double max_grad_norm = 1.0;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t patience_decay = 1;  // epochs without improvement before halving the LR
    std::size_t patience_stop = 3;   // epochs without improvement before stopping
    std::size_t max_epochs = 50;
    std::uint64_t seed = 1;

    void validate() const {
        if (batch_size == 0 || max_epochs == 0 || patience_decay == 0 || patience_stop == 0) {
            throw std::invalid_argument("TrainConfig: counts must be positive");
        }
        if (learning_rate <= 0.0 || max_grad_norm <= 0.0 || adam_eps <= 0.0) {
            throw std::invalid_argument("TrainConfig: rates must be positive");
        }
        if (adam_beta1 <= 0.0 || adam_beta1 >= 1.0 || adam_beta2 <= 0.0 || adam_beta2 >= 1.0) {
            throw std::invalid_argument("TrainConfig: betas must lie in (0, 1)");
        }
        if (patience_stop < patience_decay) {
            throw std::invalid_argument("TrainConfig: patience_stop must be >= patience_decay");
        }
    }
};

}  // namespace train
}  // namespace dialsum
