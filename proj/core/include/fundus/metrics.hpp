#pragma once

#include <string>
#include <vector>

#include "fundus/image.hpp"

namespace fundus {

struct BinaryMask {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> on;
};

BinaryMask cup_mask(const LabelMask& mask);  // CUP pixels
BinaryMask disc_mask(const LabelMask& mask); // CUP plus RIM

// 2|A intersect B| / (|A| + |B|); both empty -> 1.0.
double dice(const BinaryMask& a, const BinaryMask& b);

// (row extent of CUP) / (row extent of CUP plus RIM), extent counted as
// max_row - min_row + 1. Empty cup -> 0.0; empty disc -> DegenerateMask.
double vertical_cdr(const LabelMask& mask);

double mae_cdr(const std::vector<double>& pred, const std::vector<double>& truth);

// Mann-Whitney AUC over all positive-negative pairs, ties count 0.5.
// Computed with midranks; needs at least one of each class.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Prediction positive iff score >= threshold.
double sensitivity(const std::vector<double>& scores,
                   const std::vector<int>& labels, double threshold = 0.5);
double specificity(const std::vector<double>& scores,
                   const std::vector<int>& labels, double threshold = 0.5);

double ensemble_mean(const std::vector<double>& probabilities);

struct SegRow {
    std::string id;
    double cup_dice, disc_dice, pred_cdr, true_cdr;
};

struct SegReport {
    std::vector<SegRow> rows;
    double mean_cup_dice = 0.0;
    double mean_disc_dice = 0.0;
    double mae_cdr = 0.0;
};

SegReport make_seg_report(std::vector<SegRow> rows);

// Per-sample rows then an `aggregate` row carrying (mean cup dice, mean disc
// dice, MAE-CDR, empty).
std::string seg_report_csv(const SegReport& report);

struct ClsRow {
    std::string id;
    double prob;
    int label;
};

struct ClsReport {
    std::vector<ClsRow> rows;
    double auc = 0.0;
    double sens = 0.0;
    double spec = 0.0;
    double threshold = 0.5;
};

ClsReport make_cls_report(std::vector<ClsRow> rows, double threshold = 0.5);

// Per-sample rows then an `aggregate` row carrying (AUC, sensitivity).
std::string cls_report_csv(const ClsReport& report);

} // namespace fundus
