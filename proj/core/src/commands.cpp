#include "fundus/commands.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>

#include "fundus/checkpoint.hpp"
#include "fundus/dataset.hpp"
#include "fundus/errors.hpp"
#include "fundus/metrics.hpp"
#include "fundus/synth.hpp"
#include "fundus/text.hpp"
#include "fundus/train.hpp"

namespace fs = std::filesystem;

namespace fundus {

namespace {

void log_config(const RunConfig& cfg, std::ostream& log) {
    log << "# resolved configuration\n" << cfg.resolved();
}

std::string require_dir_key(const RunConfig& cfg, const std::string& key) {
    const std::string& v = cfg.get(key);
    if (v.empty()) throw ConfigInvalid("--" + key + " is required");
    return v;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoFailure("cannot create " + dir.string());
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoFailure("write failed for " + path.string());
}

std::string loss_csv(const std::vector<double>& history) {
    std::string out = "epoch,loss\n";
    for (std::size_t i = 0; i < history.size(); ++i) {
        out += std::to_string(i + 1) + "," + format_double(history[i]) + "\n";
    }
    return out;
}

SynthParams synth_params_from(const RunConfig& cfg) {
    SynthParams p;
    p.size = cfg.get_size("image_size");
    p.disc_min = cfg.get_double("disc_min");
    p.disc_max = cfg.get_double("disc_max");
    p.cdr_min = cfg.get_double("cdr_min");
    p.cdr_max = cfg.get_double("cdr_max");
    p.jitter = cfg.get_double("jitter");
    p.noise = cfg.get_double("noise");
    p.cdr_threshold = cfg.get_double("cdr_threshold");
    p.seed = cfg.get_u64("seed");
    return p;
}

XUnetConfig xunet_config_from(const RunConfig& cfg) {
    XUnetConfig c;
    c.depth = cfg.get_size("xunet_depth");
    c.base_channels = cfg.get_size("xunet_base");
    c.input_levels = cfg.get_size("xunet_levels");
    c.se_reduction = cfg.get_size("xunet_se");
    c.convs_per_block = cfg.get_size("xunet_convs");
    return c;
}

ClassifierConfig classifier_config_from(const RunConfig& cfg) {
    ClassifierConfig c;
    c.head_width = cfg.get_size("cls_head_width");
    c.stem_strides = cfg.get_sizes("cls_stem");
    c.body_rates = cfg.get_sizes("cls_body_rates");
    c.aspp.branch_channels = cfg.get_size("cls_branch");
    c.aspp.rates = cfg.get_sizes("cls_aspp_rates");
    c.aspp.include_image_pool = cfg.get_bool("cls_image_pool");
    return c;
}

TrainConfig train_config_from(const RunConfig& cfg) {
    TrainConfig t;
    t.epochs = cfg.get_size("epochs");
    t.batch_size = cfg.get_size("batch_size");
    t.seed = cfg.get_u64("seed");
    t.shuffle = cfg.get_bool("shuffle");
    t.lr = cfg.get_double("lr");
    return t;
}

// locate -> square crop, with the mask cropped by the same origin.
Sample crop_sample(const Sample& s, std::size_t blur, std::size_t crop) {
    const auto [cx, cy] = locate_disc(s.image, blur);
    const auto [x0, y0] = roi_origin(s.image.width, s.image.height, cx, cy, crop);
    Sample out = s;
    out.image = crop_roi(s.image, cx, cy, crop);
    if (s.mask) out.mask = crop_mask(*s.mask, x0, y0, crop);
    return out;
}

std::vector<Sample> augmented(std::vector<Sample> samples, bool enabled) {
    if (!enabled) return samples;
    return expand_dataset(samples);
}

} // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::size_t count = cfg.get_size("count");
    const auto samples = synth_generate(synth_params_from(cfg), count);
    write_dataset(out_dir, samples);
    write_text(fs::path(out_dir) / "manifest.txt", cfg.resolved());
    log << "wrote " << samples.size() << " samples to " << out_dir << "\n";
}

void cmd_train_seg(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string data_dir = require_dir_key(cfg, "data");
    const std::size_t blur = cfg.get_size("blur_window");
    const std::size_t crop = cfg.get_size("seg_crop_train");
    const std::size_t input = cfg.get_size("seg_input");

    std::vector<Sample> raw = read_dataset(data_dir);
    if (raw.empty()) throw EmptyDataset(data_dir + " has no samples");
    std::vector<Sample> prepped;
    prepped.reserve(raw.size());
    for (const Sample& s : raw) {
        if (!s.mask) {
            throw DatasetInvalid("sample " + s.id + " has no mask");
        }
        Sample c = crop_sample(s, blur, crop);
        c.image = resize_rgb(c.image, input, input);
        c.mask = resize_mask(*c.mask, input, input);
        prepped.push_back(std::move(c));
    }
    prepped = augmented(std::move(prepped), cfg.get_bool("augment"));

    std::vector<SegSample> train_set;
    train_set.reserve(prepped.size());
    for (const Sample& s : prepped) {
        train_set.push_back({s.image.to_tensor(), encode_label(*s.mask)});
    }

    XUnet model(xunet_config_from(cfg), cfg.get_u64("seed"));
    const TrainConfig tc = train_config_from(cfg);
    AdamState opt;
    const auto history = train_segmentation(model, train_set, tc, opt);

    ensure_dir(out_dir);
    save_xunet((fs::path(out_dir) / "model.rfgc").string(), model, &opt);
    write_text(fs::path(out_dir) / "loss.csv", loss_csv(history));
    log << "trained on " << train_set.size() << " samples for "
        << history.size() << " epochs; final loss "
        << format_double(history.back()) << "\n";
}

void cmd_train_cls(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string data_dir = require_dir_key(cfg, "data");
    const std::size_t blur = cfg.get_size("blur_window");
    const std::size_t crop = cfg.get_size("cls_crop_train");
    const std::vector<std::size_t> scales = cfg.get_sizes("cls_scales");
    if (scales.empty()) throw ConfigInvalid("cls_scales must be non-empty");

    std::vector<Sample> raw = read_dataset(data_dir);
    if (raw.empty()) throw EmptyDataset(data_dir + " has no samples");
    std::vector<Sample> cropped;
    cropped.reserve(raw.size());
    for (const Sample& s : raw) {
        if (!s.glaucoma) {
            throw DatasetInvalid("sample " + s.id + " has no glaucoma label");
        }
        cropped.push_back(crop_sample(s, blur, crop));
    }
    cropped = augmented(std::move(cropped), cfg.get_bool("augment"));

    const ClassifierConfig cc = classifier_config_from(cfg);
    const TrainConfig tc = train_config_from(cfg);
    const std::uint64_t seed = cfg.get_u64("seed");
    ensure_dir(out_dir);

    if (cfg.get_bool("cls_shared_model")) {
        // One model sees every scale of every sample; one view per scale
        // keeps minibatch shapes uniform.
        std::vector<std::vector<ClsSample>> views(scales.size());
        for (std::size_t i = 0; i < scales.size(); ++i) {
            views[i].reserve(cropped.size());
            for (const Sample& s : cropped) {
                views[i].push_back({resize_rgb(s.image, scales[i], scales[i])
                                        .to_tensor(),
                                    *s.glaucoma});
            }
        }
        Classifier model(cc, seed);
        AdamState opt;
        const auto history = train_classifier_multiview(model, views, tc, opt);
        save_classifier((fs::path(out_dir) / "model_shared.rfgc").string(),
                        model, &opt, 0);
        write_text(fs::path(out_dir) / "loss.csv", loss_csv(history));
        log << "trained shared model over " << scales.size()
            << " scales; final loss " << format_double(history.back()) << "\n";
        return;
    }

    for (std::size_t i = 0; i < scales.size(); ++i) {
        const std::size_t scale = scales[i];
        std::vector<ClsSample> train_set;
        train_set.reserve(cropped.size());
        for (const Sample& s : cropped) {
            train_set.push_back(
                {resize_rgb(s.image, scale, scale).to_tensor(), *s.glaucoma});
        }
        Classifier model(cc, seed + i);
        AdamState opt;
        const auto history = train_classifier(model, train_set, tc, opt);
        const std::string name = "model_s" + std::to_string(scale) + ".rfgc";
        save_classifier((fs::path(out_dir) / name).string(), model, &opt, scale);
        write_text(fs::path(out_dir) / ("loss_s" + std::to_string(scale) + ".csv"),
                   loss_csv(history));
        log << "scale " << scale << ": final loss "
            << format_double(history.back()) << "\n";
    }
}

void cmd_predict_seg(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string data_dir = require_dir_key(cfg, "data");
    const std::string model_path = require_dir_key(cfg, "model");
    const std::size_t blur = cfg.get_size("blur_window");
    const std::size_t crop = cfg.get_size("seg_crop_eval");
    const std::size_t input = cfg.get_size("seg_input");
    const double t_cup = cfg.get_double("t_cup");
    const double t_disc = cfg.get_double("t_disc");

    LoadedXUnet loaded = load_xunet(model_path);
    const std::vector<Sample> samples = read_dataset(data_dir);
    if (samples.empty()) throw EmptyDataset(data_dir + " has no samples");

    ensure_dir(fs::path(out_dir) / "masks");
    for (const Sample& s : samples) {
        const auto [cx, cy] = locate_disc(s.image, blur);
        RgbImage roi = crop_roi(s.image, cx, cy, crop);
        const Tensor net_in = resize_rgb(roi, input, input).to_tensor();
        const Tensor pred = loaded.model->forward(net_in);
        LabelMask mask = decode_prediction(pred, t_cup, t_disc);
        mask = resize_mask(mask, crop, crop);
        write_pgm(mask, (fs::path(out_dir) / "masks" / (s.id + ".pgm")).string());
    }
    log << "wrote " << samples.size() << " predicted masks to " << out_dir
        << "/masks\n";
}

void cmd_predict_cls(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string data_dir = require_dir_key(cfg, "data");
    const std::string model_key = require_dir_key(cfg, "model");
    const std::size_t blur = cfg.get_size("blur_window");
    const std::size_t crop = cfg.get_size("cls_crop_eval");
    const std::vector<std::size_t> default_scales = cfg.get_sizes("cls_scales");

    std::vector<LoadedClassifier> members;
    for (const std::string& part : split(model_key, ',')) {
        const std::string path = trim(part);
        if (path.empty()) continue;
        members.push_back(load_classifier(path));
    }
    if (members.empty()) throw ConfigInvalid("no checkpoints in --model");

    const std::vector<Sample> samples = read_dataset(data_dir);
    if (samples.empty()) throw EmptyDataset(data_dir + " has no samples");

    std::string csv = "id,prob\n";
    for (const Sample& s : samples) {
        const auto [cx, cy] = locate_disc(s.image, blur);
        RgbImage roi = crop_roi(s.image, cx, cy, crop);
        std::vector<double> probs;
        for (LoadedClassifier& member : members) {
            std::vector<std::size_t> scales;
            if (member.input_scale > 0) {
                scales.push_back(member.input_scale);
            } else {
                scales = default_scales; // scale-agnostic checkpoint
            }
            if (scales.empty()) {
                throw ConfigInvalid("cls_scales must be non-empty for "
                                    "scale-agnostic checkpoints");
            }
            for (std::size_t scale : scales) {
                const Tensor in = resize_rgb(roi, scale, scale).to_tensor();
                probs.push_back(classifier_predict(*member.model, in)[0]);
            }
        }
        csv += s.id + "," + format_double(ensemble_mean(probs)) + "\n";
    }
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "probs.csv", csv);
    log << "wrote probabilities for " << samples.size() << " samples to "
        << out_dir << "/probs.csv\n";
}

void cmd_eval_seg(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string truth_dir = require_dir_key(cfg, "data");
    const std::string pred_dir = require_dir_key(cfg, "pred");
    const std::size_t blur = cfg.get_size("blur_window");
    const std::size_t crop = cfg.get_size("seg_crop_eval");

    const std::vector<Sample> truth = read_dataset(truth_dir);
    if (truth.empty()) throw EmptyDataset(truth_dir + " has no samples");

    std::vector<SegRow> rows;
    for (const Sample& s : truth) {
        if (!s.mask) throw DatasetInvalid("sample " + s.id + " has no mask");
        const fs::path pred_path = fs::path(pred_dir) / "masks" / (s.id + ".pgm");
        if (!fs::exists(pred_path)) {
            throw IdMismatch("no prediction for id " + s.id);
        }
        const LabelMask pred = read_pgm(pred_path.string());
        if (pred.width != crop || pred.height != crop) {
            throw DatasetInvalid("prediction for " + s.id + " is not " +
                                 std::to_string(crop) + "x" +
                                 std::to_string(crop));
        }
        const auto [cx, cy] = locate_disc(s.image, blur);
        const auto [x0, y0] =
            roi_origin(s.image.width, s.image.height, cx, cy, crop);
        const LabelMask truth_crop = crop_mask(*s.mask, x0, y0, crop);

        SegRow row;
        row.id = s.id;
        row.cup_dice = dice(cup_mask(pred), cup_mask(truth_crop));
        row.disc_dice = dice(disc_mask(pred), disc_mask(truth_crop));
        try {
            row.pred_cdr = vertical_cdr(pred);
        } catch (const DegenerateMask&) {
            row.pred_cdr = 0.0; // no predicted disc at all
        }
        try {
            row.true_cdr = vertical_cdr(truth_crop);
        } catch (const DegenerateMask&) {
            throw DatasetInvalid("truth mask for " + s.id + " has empty disc");
        }
        rows.push_back(std::move(row));
    }

    const SegReport report = make_seg_report(std::move(rows));
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "report.csv", seg_report_csv(report));
    log << "cup dice " << format_double(report.mean_cup_dice) << ", disc dice "
        << format_double(report.mean_disc_dice) << ", mae-cdr "
        << format_double(report.mae_cdr) << "\n";
}

void cmd_eval_cls(const RunConfig& cfg, std::ostream& log) {
    log_config(cfg, log);
    const std::string out_dir = require_dir_key(cfg, "out");
    const std::string truth_dir = require_dir_key(cfg, "data");
    const std::string pred_dir = require_dir_key(cfg, "pred");
    const double threshold = cfg.get_double("threshold");

    const fs::path probs_path = fs::path(pred_dir) / "probs.csv";
    std::ifstream in(probs_path, std::ios::binary);
    if (!in) throw DatasetInvalid("missing " + probs_path.string());
    std::string line;
    if (!std::getline(in, line) || trim(line) != "id,prob") {
        throw DatasetInvalid("bad probs.csv header in " + pred_dir);
    }
    std::map<std::string, double> probs;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 2 || fields[0].empty()) {
            throw DatasetInvalid("bad probs.csv row: '" + line + "'");
        }
        if (!probs.emplace(fields[0], parse_double(fields[1], "prob")).second) {
            throw DatasetInvalid("duplicate id " + fields[0] + " in probs.csv");
        }
    }

    const std::vector<Sample> truth = read_dataset(truth_dir);
    if (truth.empty()) throw EmptyDataset(truth_dir + " has no samples");

    std::vector<ClsRow> rows;
    std::size_t matched = 0;
    for (const Sample& s : truth) {
        if (!s.glaucoma) {
            throw DatasetInvalid("sample " + s.id + " has no glaucoma label");
        }
        const auto it = probs.find(s.id);
        if (it == probs.end()) throw IdMismatch("no prediction for id " + s.id);
        ++matched;
        rows.push_back({s.id, it->second, *s.glaucoma});
    }
    if (matched != probs.size()) {
        for (const auto& [id, prob] : probs) {
            (void)prob;
            const bool known =
                std::any_of(truth.begin(), truth.end(),
                            [&](const Sample& s) { return s.id == id; });
            if (!known) throw IdMismatch("prediction for unknown id " + id);
        }
    }

    const ClsReport report = make_cls_report(std::move(rows), threshold);
    ensure_dir(out_dir);
    write_text(fs::path(out_dir) / "report.csv", cls_report_csv(report));
    log << "auc " << format_double(report.auc) << ", sensitivity "
        << format_double(report.sens) << ", specificity "
        << format_double(report.spec) << "\n";
}

namespace {

constexpr const char* kUsage =
    "usage: fundus <command> [--config PATH] [--key value ...]\n"
    "commands:\n"
    "  synth        generate a synthetic fundus dataset\n"
    "  train-seg    train the segmentation network\n"
    "  train-cls    train the glaucoma classifier(s)\n"
    "  predict-seg  write predicted masks for a dataset\n"
    "  predict-cls  write ensemble glaucoma probabilities\n"
    "  eval-seg     score predicted masks against ground truth\n"
    "  eval-cls     score predicted probabilities against labels\n";

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
    try {
        if (args.empty()) {
            throw ConfigInvalid(std::string("no command given\n") + kUsage);
        }
        const std::string& command = args[0];
        if (command == "help" || command == "--help" || command == "-h") {
            out << kUsage;
            return 0;
        }

        std::vector<std::pair<std::string, std::string>> pairs;
        for (std::size_t i = 1; i < args.size(); i += 2) {
            if (args[i].rfind("--", 0) != 0 || args[i].size() <= 2) {
                throw ConfigInvalid("expected --key, got '" + args[i] + "'");
            }
            if (i + 1 >= args.size()) {
                throw ConfigInvalid("missing value for " + args[i]);
            }
            pairs.emplace_back(args[i].substr(2), args[i + 1]);
        }

        RunConfig cfg;
        for (const auto& [key, value] : pairs) {
            if (key == "config") cfg.load_file(value);
        }
        for (const auto& [key, value] : pairs) {
            if (key != "config") cfg.set(key, value);
        }

        if (command == "synth") {
            cmd_synth(cfg, out);
        } else if (command == "train-seg") {
            cmd_train_seg(cfg, out);
        } else if (command == "train-cls") {
            cmd_train_cls(cfg, out);
        } else if (command == "predict-seg") {
            cmd_predict_seg(cfg, out);
        } else if (command == "predict-cls") {
            cmd_predict_cls(cfg, out);
        } else if (command == "eval-seg") {
            cmd_eval_seg(cfg, out);
        } else if (command == "eval-cls") {
            cmd_eval_cls(cfg, out);
        } else {
            throw ConfigInvalid("unknown command '" + command + "'\n" + kUsage);
        }
        return 0;
    } catch (const std::exception& e) {
        err << e.what() << "\n";
        return 1;
    }
}

} // namespace fundus
