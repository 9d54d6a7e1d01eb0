#include "fundus/train.hpp"

#include <numeric>

#include "fundus/errors.hpp"
#include "fundus/loss.hpp"

namespace fundus {

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) {
        throw ConfigInvalid("epochs and batch_size must be >= 1");
    }
    if (!(lr >= 0.0)) throw ConfigInvalid("lr must be >= 0");
}

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, bool shuffle,
                                     SplitMix64& rng) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    if (shuffle) fundus::shuffle(order, rng);
    return order;
}

// One optimizer step on one stacked batch; returns the summed (unscaled)
// per-sample loss so callers can average however their epoch is shaped.
double cls_batch_step(Classifier& model, ParamMap& params,
                      const std::vector<const ClsSample*>& batch,
                      AdamState& opt) {
    std::vector<const Tensor*> images;
    images.reserve(batch.size());
    for (const ClsSample* s : batch) images.push_back(&s->image);
    const Tensor stacked = stack_batch(images);

    const Tensor logits = model.forward(stacked);
    Tensor grad_logits(logits.shape());
    double loss_sum = 0.0;
    const double b = double(batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) {
        const BceResult r = bce_loss(logits[k], batch[k]->label);
        loss_sum += r.loss;
        grad_logits[k] = r.grad_logit / b;
    }

    GradMap grads;
    model.backward(grad_logits, "", grads);
    adam_step(params, grads, opt);
    return loss_sum;
}

} // namespace

std::vector<double> train_segmentation(XUnet& model,
                                       const std::vector<SegSample>& data,
                                       const TrainConfig& cfg, AdamState& opt) {
    cfg.validate();
    if (data.empty()) throw EmptyDataset("train_segmentation on empty dataset");
    opt.lr = cfg.lr;

    ParamMap params;
    model.collect_params("", params);
    SplitMix64 shuffle_rng = stream_for(cfg.seed, 0);

    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(data.size(), cfg.shuffle, shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + cfg.batch_size);
            std::vector<const Tensor*> images, targets;
            for (std::size_t k = start; k < stop; ++k) {
                images.push_back(&data[order[k]].image);
                targets.push_back(&data[order[k]].target);
            }
            const Tensor batch = stack_batch(images);
            const Tensor target = stack_batch(targets);

            const Tensor pred = model.forward(batch);
            MaeResult loss = mae_loss(pred, target);
            epoch_loss += loss.loss * double(stop - start);

            GradMap grads;
            model.backward(loss.grad, "", grads);
            adam_step(params, grads, opt);
        }
        history.push_back(epoch_loss / double(order.size()));
    }
    return history;
}

std::vector<double> train_classifier(Classifier& model,
                                     const std::vector<ClsSample>& data,
                                     const TrainConfig& cfg, AdamState& opt) {
    cfg.validate();
    if (data.empty()) throw EmptyDataset("train_classifier on empty dataset");
    opt.lr = cfg.lr;

    ParamMap params;
    model.collect_params("", params);
    SplitMix64 shuffle_rng = stream_for(cfg.seed, 0);

    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(data.size(), cfg.shuffle, shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += cfg.batch_size) {
            const std::size_t stop =
                std::min(order.size(), start + cfg.batch_size);
            std::vector<const ClsSample*> batch;
            batch.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(&data[order[k]]);
            }
            epoch_loss += cls_batch_step(model, params, batch, opt);
        }
        history.push_back(epoch_loss / double(order.size()));
    }
    return history;
}

std::vector<double> train_classifier_multiview(
    Classifier& model, const std::vector<std::vector<ClsSample>>& views,
    const TrainConfig& cfg, AdamState& opt) {
    cfg.validate();
    if (views.empty() || views.front().empty()) {
        throw EmptyDataset("train_classifier_multiview on empty dataset");
    }
    const std::size_t n = views.front().size();
    for (const auto& view : views) {
        if (view.size() != n) {
            throw LengthMismatch("every view must hold the same samples");
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (view[i].label != views.front()[i].label) {
                throw LabelInvalid("views disagree on label of sample " +
                                   std::to_string(i));
            }
        }
    }
    opt.lr = cfg.lr;

    ParamMap params;
    model.collect_params("", params);
    SplitMix64 shuffle_rng = stream_for(cfg.seed, 0);

    std::vector<double> history;
    history.reserve(cfg.epochs);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = epoch_order(n, cfg.shuffle, shuffle_rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(n, start + cfg.batch_size);
            // Same sample indices at every view; each stack is shape-uniform.
            for (const auto& view : views) {
                std::vector<const ClsSample*> batch;
                batch.reserve(stop - start);
                for (std::size_t k = start; k < stop; ++k) {
                    batch.push_back(&view[order[k]]);
                }
                epoch_loss += cls_batch_step(model, params, batch, opt);
            }
        }
        history.push_back(epoch_loss / double(n * views.size()));
    }
    return history;
}

} // namespace fundus
