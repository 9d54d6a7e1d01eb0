#pragma once

#include <cstdint>
#include <vector>

#include "fundus/adam.hpp"
#include "fundus/models.hpp"

namespace fundus {

struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    bool shuffle = true;
    double lr = 0.0001;

    void validate() const;
};

struct SegSample {
    Tensor image;  // [1,3,H,W] in [0,1]
    Tensor target; // [1,1,H,W] in [0,1]
};

struct ClsSample {
    Tensor image; // [1,3,H,W] in [0,1]
    int label;    // {0,1}
};

// Mini-batch training: seeded shuffle each epoch, forward -> loss -> backward
// -> adam_step. Returns the per-epoch mean loss (sample-weighted over the
// pre-update batch losses). Deterministic given (model, data order, cfg).
std::vector<double> train_segmentation(XUnet& model,
                                       const std::vector<SegSample>& data,
                                       const TrainConfig& cfg, AdamState& opt);

std::vector<double> train_classifier(Classifier& model,
                                     const std::vector<ClsSample>& data,
                                     const TrainConfig& cfg, AdamState& opt);

// Shared-weight multi-scale training. Each inner vector is one view (one
// input scale) of the same samples in the same order; a minibatch stacks a
// single view so shapes stay uniform, and every view of every sample is
// visited each epoch. With one view this is exactly train_classifier.
std::vector<double> train_classifier_multiview(
    Classifier& model, const std::vector<std::vector<ClsSample>>& views,
    const TrainConfig& cfg, AdamState& opt);

} // namespace fundus
