#include "fundus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fundus/errors.hpp"
#include "fundus/text.hpp"

namespace fundus {

namespace {

BinaryMask select_pixels(const LabelMask& mask, bool include_rim) {
    BinaryMask out{mask.width, mask.height, {}};
    out.on.resize(mask.pixels.size());
    for (std::size_t i = 0; i < mask.pixels.size(); ++i) {
        out.on[i] = mask.pixels[i] == kCupPixel ||
                    (include_rim && mask.pixels[i] == kRimPixel);
    }
    return out;
}

} // namespace

BinaryMask cup_mask(const LabelMask& mask) { return select_pixels(mask, false); }
BinaryMask disc_mask(const LabelMask& mask) { return select_pixels(mask, true); }

double dice(const BinaryMask& a, const BinaryMask& b) {
    if (a.width != b.width || a.height != b.height) {
        throw ShapeMismatch("dice on masks of different dims");
    }
    std::size_t inter = 0, total = 0;
    for (std::size_t i = 0; i < a.on.size(); ++i) {
        inter += a.on[i] && b.on[i];
        total += std::size_t(a.on[i] != 0) + std::size_t(b.on[i] != 0);
    }
    if (total == 0) return 1.0;
    return 2.0 * double(inter) / double(total);
}

double vertical_cdr(const LabelMask& mask) {
    std::size_t cup_min = mask.height, cup_max = 0;
    std::size_t disc_min = mask.height, disc_max = 0;
    bool any_cup = false, any_disc = false;
    for (std::size_t y = 0; y < mask.height; ++y) {
        for (std::size_t x = 0; x < mask.width; ++x) {
            const std::uint8_t v = mask.at(y, x);
            if (v == kCupPixel) {
                cup_min = std::min(cup_min, y);
                cup_max = std::max(cup_max, y);
                any_cup = true;
            }
            if (v == kCupPixel || v == kRimPixel) {
                disc_min = std::min(disc_min, y);
                disc_max = std::max(disc_max, y);
                any_disc = true;
            }
        }
    }
    if (!any_disc) throw DegenerateMask("vertical_cdr on mask with empty disc");
    if (!any_cup) return 0.0;
    return double(cup_max - cup_min + 1) / double(disc_max - disc_min + 1);
}

double mae_cdr(const std::vector<double>& pred,
               const std::vector<double>& truth) {
    if (pred.size() != truth.size()) {
        throw LengthMismatch("mae_cdr lists of length " +
                             std::to_string(pred.size()) + " and " +
                             std::to_string(truth.size()));
    }
    if (pred.empty()) throw Empty("mae_cdr on empty lists");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += std::fabs(pred[i] - truth[i]);
    }
    return acc / double(pred.size());
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
    if (scores.size() != labels.size()) {
        throw LengthMismatch("roc_auc scores vs labels");
    }
    std::size_t pos = 0, neg = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw LabelInvalid("roc_auc label must be 0 or 1");
        (y == 1 ? pos : neg) += 1;
    }
    if (pos == 0 || neg == 0) {
        throw OneClassOnly("roc_auc needs both classes");
    }

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                         return scores[a] < scores[b];
                     });

    // Midranks: tied scores share the average of their 1-based positions.
    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() &&
               scores[order[j + 1]] == scores[order[i]]) {
            ++j;
        }
        const double midrank = (double(i + 1) + double(j + 1)) / 2.0;
        for (std::size_t k = i; k <= j; ++k) {
            if (labels[order[k]] == 1) pos_rank_sum += midrank;
        }
        i = j + 1;
    }
    return (pos_rank_sum - double(pos) * double(pos + 1) / 2.0) /
           (double(pos) * double(neg));
}

namespace {

double rate_at_threshold(const std::vector<double>& scores,
                         const std::vector<int>& labels, double threshold,
                         int which_class, const char* name) {
    if (scores.size() != labels.size()) {
        throw LengthMismatch(std::string(name) + " scores vs labels");
    }
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1) {
            throw LabelInvalid(std::string(name) + " label must be 0 or 1");
        }
        if (labels[i] != which_class) continue;
        ++total;
        const bool predicted_positive = scores[i] >= threshold;
        if (predicted_positive == (which_class == 1)) ++hits;
    }
    if (total == 0) {
        throw OneClassOnly(std::string(name) + " needs class " +
                           std::to_string(which_class));
    }
    return double(hits) / double(total);
}

} // namespace

double sensitivity(const std::vector<double>& scores,
                   const std::vector<int>& labels, double threshold) {
    return rate_at_threshold(scores, labels, threshold, 1, "sensitivity");
}

double specificity(const std::vector<double>& scores,
                   const std::vector<int>& labels, double threshold) {
    return rate_at_threshold(scores, labels, threshold, 0, "specificity");
}

double ensemble_mean(const std::vector<double>& probabilities) {
    if (probabilities.empty()) throw Empty("ensemble_mean on empty list");
    double acc = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw LabelInvalid("probability " + format_double(p) +
                               " outside [0,1]");
        }
        acc += p;
    }
    return acc / double(probabilities.size());
}

SegReport make_seg_report(std::vector<SegRow> rows) {
    if (rows.empty()) throw Empty("segmentation report with no rows");
    SegReport r;
    r.rows = std::move(rows);
    std::vector<double> pred, truth;
    for (const SegRow& row : r.rows) {
        r.mean_cup_dice += row.cup_dice;
        r.mean_disc_dice += row.disc_dice;
        pred.push_back(row.pred_cdr);
        truth.push_back(row.true_cdr);
    }
    r.mean_cup_dice /= double(r.rows.size());
    r.mean_disc_dice /= double(r.rows.size());
    r.mae_cdr = mae_cdr(pred, truth);
    return r;
}

std::string seg_report_csv(const SegReport& report) {
    std::string out = "id,cup_dice,disc_dice,pred_cdr,true_cdr\n";
    for (const SegRow& row : report.rows) {
        out += row.id + "," + format_double(row.cup_dice) + "," +
               format_double(row.disc_dice) + "," +
               format_double(row.pred_cdr) + "," +
               format_double(row.true_cdr) + "\n";
    }
    out += "aggregate," + format_double(report.mean_cup_dice) + "," +
           format_double(report.mean_disc_dice) + "," +
           format_double(report.mae_cdr) + ",\n";
    return out;
}

ClsReport make_cls_report(std::vector<ClsRow> rows, double threshold) {
    if (rows.empty()) throw Empty("classification report with no rows");
    ClsReport r;
    r.rows = std::move(rows);
    r.threshold = threshold;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const ClsRow& row : r.rows) {
        scores.push_back(row.prob);
        labels.push_back(row.label);
    }
    r.auc = roc_auc(scores, labels);
    r.sens = sensitivity(scores, labels, threshold);
    r.spec = specificity(scores, labels, threshold);
    return r;
}

std::string cls_report_csv(const ClsReport& report) {
    std::string out = "id,prob,label\n";
    for (const ClsRow& row : report.rows) {
        out += row.id + "," + format_double(row.prob) + "," +
               std::to_string(row.label) + "\n";
    }
    out += "aggregate," + format_double(report.auc) + "," +
           format_double(report.sens) + "\n";
    return out;
}

} // namespace fundus
