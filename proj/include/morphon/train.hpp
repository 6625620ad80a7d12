#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "morphon/checkpoint.hpp"
#include "morphon/data.hpp"
#include "morphon/loss.hpp"
#include "morphon/metrics.hpp"
#include "morphon/network.hpp"
#include "morphon/optim.hpp"

namespace morphon {

struct TrainOptions {
    NetworkSpec spec;
    std::uint64_t seed = 1;
    int epochs = 50;
    int batch_size = 1;
    LossConfig loss;
    double lr = 0.001;
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    double val_loss = std::numeric_limits<double>::quiet_NaN();
    double val_ssim = std::numeric_limits<double>::quiet_NaN();
    double val_psnr = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
    Network net;
    AdamState adam;
    std::vector<EpochRecord> log;
    TrainingMeta meta;
};

// One epoch = one pass over the training pairs in seeded-shuffled order.
// Gradients accumulate over each batch, then a single Adam step is applied.
inline TrainResult train(const TrainOptions& opt, const std::vector<ImagePair>& train_pairs,
                         const std::vector<ImagePair>* val_pairs = nullptr,
                         const std::function<void(const EpochRecord&)>& on_epoch = nullptr) {
    if (train_pairs.empty() && opt.epochs > 0)
        throw std::invalid_argument("train: no training pairs");
    if (opt.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");

    TrainResult result{Network::build(opt.spec, opt.seed), AdamState{}, {}, {}};
    result.adam.lr = opt.lr;
    Rng shuffle_rng(opt.seed ^ 0x9e3779b97f4a7c15ULL);

    std::vector<std::size_t> order(train_pairs.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t i = 0;
        while (i < order.size()) {
            result.net.zero_grad();
            const std::size_t batch_end = std::min(order.size(), i + opt.batch_size);
            for (; i < batch_end; ++i) {
                const ImagePair& pair = train_pairs[order[i]];
                const ForwardTrace trace = result.net.forward(pair.rainy);
                const double loss = result.net.backward(trace, pair.clean, opt.loss);
                if (!std::isfinite(loss))
                    throw std::runtime_error("train: loss became non-finite at epoch " +
                                             std::to_string(epoch));
                loss_sum += loss;
            }
            result.net.adam_step(result.adam);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_pairs.size());
        if (val_pairs && !val_pairs->empty()) {
            double vloss = 0.0, vssim = 0.0, vpsnr = 0.0;
            for (const ImagePair& pair : *val_pairs) {
                const ForwardTrace trace = result.net.forward(pair.rainy);
                vloss += total_loss(trace.output, pair.clean, opt.loss);
                vssim += eval_ssim(trace.output, pair.clean, opt.loss);
                vpsnr += psnr(trace.output, pair.clean);
            }
            const double n = static_cast<double>(val_pairs->size());
            rec.val_loss = vloss / n;
            rec.val_ssim = vssim / n;
            rec.val_psnr = vpsnr / n;
        }
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
    }

    result.meta.epochs_run = static_cast<std::uint64_t>(opt.epochs);
    if (!result.log.empty()) {
        result.meta.final_train_loss = result.log.back().train_loss;
        result.meta.final_val_loss = result.log.back().val_loss;
    }
    return result;
}

}  // namespace morphon
