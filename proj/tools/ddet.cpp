// ddet: dense one-stage detector, desk scale.
// Subcommands: synth, train, eval, detect, bench, cdf.
// Exit codes: 0 success, 1 usage error, 2 data/model error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "ddet/checkpoint.hpp"
#include "ddet/config.hpp"
#include "ddet/dataset.hpp"
#include "ddet/diagnostics.hpp"
#include "ddet/eval.hpp"
#include "ddet/fps.hpp"
#include "ddet/model.hpp"
#include "ddet/render.hpp"
#include "ddet/synth.hpp"
#include "ddet/train.hpp"

namespace fs = std::filesystem;
using namespace ddet;

namespace {

struct Flags {
    RunConfig cfg;
    std::string config_path;
    std::string checkpoint = "checkpoint.ddet";
    std::string split = "test";
    int warmup = 5;
    int runs = 30;
    bool exclude_postprocess = false;
    std::string gammas = "0,0.5,1,2";
};

void add_config_flag(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config_path, "Config file ([section] key = value)");
}

void add_run_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--seed", f.cfg.seed, "Random seed")->capture_default_str();
    cmd->add_option("--out", f.cfg.output_dir, "Output directory")->capture_default_str();
}

void add_train_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--dataset", f.cfg.dataset, "Dataset root directory")->required();
    cmd->add_option("--lr", f.cfg.optim.learning_rate, "Initial learning rate")
        ->capture_default_str();
    cmd->add_option("--momentum", f.cfg.optim.momentum, "SGD momentum")->capture_default_str();
    cmd->add_option("--weight-decay", f.cfg.optim.weight_decay, "Weight decay")
        ->capture_default_str();
    cmd->add_option("--steps", f.cfg.optim.steps, "Training steps")->capture_default_str();
    cmd->add_option("--batch-size", f.cfg.optim.batch_size, "Batch size")->capture_default_str();
    cmd->add_option("--gamma", f.cfg.gamma, "Focal loss gamma")->capture_default_str();
    cmd->add_option("--alpha", f.cfg.alpha, "Focal loss alpha")->capture_default_str();
    cmd->add_option("--cls-mode", f.cfg.cls_mode,
                    "Classification loss: focal, hard_negative_ce or plain_ce")
        ->capture_default_str();
    cmd->add_option("--neg-pos-ratio", f.cfg.neg_pos_ratio,
                    "Mined negatives per positive (hard_negative_ce)")
        ->capture_default_str();
    cmd->add_option("--preset", f.cfg.preset, "Preset: desk (linear lr warmup over 200 steps)");
    cmd->add_flag("--include-lost", f.cfg.include_lost, "Keep lost=1 boxes as targets");
}

// Flags the user passed explicitly win over the config file.
void merge_config_file(CLI::App* cmd, Flags& f) {
    if (f.config_path.empty()) return;
    std::ifstream is(f.config_path);
    if (!is) throw std::runtime_error("cannot open config file: " + f.config_path);
    RunConfig file_cfg;
    parse_config_into(is, file_cfg);
    RunConfig merged = file_cfg;
    // re-apply only explicitly given flags on top of the file values
    Flags defaults;
    auto keep = [&](const char* name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };
    merged.dataset = keep("--dataset") ? f.cfg.dataset
                     : (file_cfg.dataset.empty() ? f.cfg.dataset : file_cfg.dataset);
    if (keep("--seed")) { merged.seed = f.cfg.seed; merged.optim.seed = f.cfg.seed; merged.synth.seed = f.cfg.seed; }
    if (keep("--out")) merged.output_dir = f.cfg.output_dir;
    if (keep("--lr")) merged.optim.learning_rate = f.cfg.optim.learning_rate;
    if (keep("--momentum")) merged.optim.momentum = f.cfg.optim.momentum;
    if (keep("--weight-decay")) merged.optim.weight_decay = f.cfg.optim.weight_decay;
    if (keep("--steps")) merged.optim.steps = f.cfg.optim.steps;
    if (keep("--batch-size")) merged.optim.batch_size = f.cfg.optim.batch_size;
    if (keep("--gamma")) merged.gamma = f.cfg.gamma;
    if (keep("--alpha")) merged.alpha = f.cfg.alpha;
    if (keep("--cls-mode")) merged.cls_mode = f.cfg.cls_mode;
    if (keep("--neg-pos-ratio")) merged.neg_pos_ratio = f.cfg.neg_pos_ratio;
    if (keep("--preset")) merged.preset = f.cfg.preset;
    if (keep("--include-lost")) merged.include_lost = f.cfg.include_lost;
    if (keep("--image-size")) merged.synth.image_size = f.cfg.synth.image_size;
    if (keep("--train-images")) merged.synth.train_images = f.cfg.synth.train_images;
    if (keep("--test-images")) merged.synth.test_images = f.cfg.synth.test_images;
    if (keep("--min-objects")) merged.synth.min_objects = f.cfg.synth.min_objects;
    if (keep("--max-objects")) merged.synth.max_objects = f.cfg.synth.max_objects;
    if (keep("--noise")) merged.synth.noise = f.cfg.synth.noise;
    f.cfg = merged;
}

PyramidConfig pyramid_for(const Dataset& ds) {
    PyramidConfig p;
    p.num_classes = static_cast<int>(ds.class_names.size());
    return p;
}

std::vector<GtObject> gt_of(const Sample& s) {
    std::vector<GtObject> gt;
    for (const AnnotatedObject& o : s.gt.objects) gt.push_back({o.box, o.class_id});
    return gt;
}

int cmd_synth(Flags& f) {
    f.cfg.synth.seed = f.cfg.seed;
    f.cfg.synth.validate();
    write_synth_dataset(f.cfg.synth, f.cfg.output_dir);
    std::cout << "wrote " << f.cfg.synth.train_images << " train / " << f.cfg.synth.test_images
              << " test images to " << f.cfg.output_dir << "\n";
    return 0;
}

int cmd_train(Flags& f) {
    f.cfg.apply_preset();
    f.cfg.validate();
    Dataset ds = load_dataset(f.cfg.dataset, "train", f.cfg.include_lost);
    PyramidConfig pcfg = pyramid_for(ds);
    fs::create_directories(f.cfg.output_dir);
    std::ofstream log(f.cfg.output_dir + "/loss_log.csv");
    ParamMap<float> params = train_detector(ds.samples, pcfg, f.cfg, &log);
    std::string ckpt = f.cfg.output_dir + "/" + f.checkpoint;
    save_checkpoint_file(ckpt, params);
    std::cout << "checkpoint written to " << ckpt << "\n";
    return 0;
}

std::vector<FrameDetections> detect_all(const ParamMap<float>& params, const Dataset& ds,
                                        const PyramidConfig& pcfg, const RunConfig& cfg) {
    std::vector<FrameDetections> out;
    for (const Sample& s : ds.samples) {
        std::vector<Detection> dets =
            predict(params, s.image, pcfg, cfg.score_thr,
                    static_cast<std::size_t>(cfg.topk_per_level), cfg.nms_iou,
                    static_cast<std::size_t>(cfg.max_detections));
        out.push_back({s.gt.frame_index, std::move(dets)});
    }
    return out;
}

int cmd_eval(Flags& f) {
    f.cfg.validate();
    Dataset ds = load_dataset(f.cfg.dataset, f.split, f.cfg.include_lost);
    PyramidConfig pcfg = pyramid_for(ds);
    ParamMap<float> params = load_checkpoint_file<float>(f.checkpoint);
    std::vector<FrameDetections> dets = detect_all(params, ds, pcfg, f.cfg);
    std::vector<FrameGt> gts;
    for (const Sample& s : ds.samples) gts.push_back({s.gt.frame_index, gt_of(s)});
    EvalResult res = evaluate_detections(dets, gts, pcfg.num_classes, 0.5, f.cfg.eleven_point);
    fs::create_directories(f.cfg.output_dir);
    {
        std::ofstream os(f.cfg.output_dir + "/eval.csv");
        write_eval_csv(os, res, ds.class_names);
    }
    {
        std::ofstream os(f.cfg.output_dir + "/pr.csv");
        write_pr_csv(os, res, ds.class_names);
    }
    std::cout << "mAP@" << res.iou_threshold << " = " << res.mAP << "\n";
    return 0;
}

int cmd_detect(Flags& f) {
    f.cfg.validate();
    Dataset ds = load_dataset(f.cfg.dataset, f.split, f.cfg.include_lost);
    PyramidConfig pcfg = pyramid_for(ds);
    ParamMap<float> params = load_checkpoint_file<float>(f.checkpoint);
    std::vector<FrameDetections> dets = detect_all(params, ds, pcfg, f.cfg);
    fs::create_directories(f.cfg.output_dir);
    {
        std::ofstream os(f.cfg.output_dir + "/detections.csv");
        write_detections_csv(os, dets, ds.class_names);
    }
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const Sample& s = ds.samples[i];
        Tensorf raw = denormalize_image(s.image);
        Tensorf overlay = render_detections(raw, dets[i].dets);
        std::string stem = f.cfg.output_dir + "/frame_" + std::to_string(s.gt.frame_index);
        save_ppm_file(stem + ".ppm", overlay);
        std::ofstream svg(stem + ".svg");
        write_svg_overlay(svg, s.width(), s.height(), dets[i].dets, ds.class_names);
    }
    std::cout << "detections and overlays written to " << f.cfg.output_dir << "\n";
    return 0;
}

int cmd_bench(Flags& f) {
    f.cfg.validate();
    PyramidConfig pcfg;
    ParamMap<float> params;
    if (!f.checkpoint.empty() && fs::exists(f.checkpoint)) {
        params = load_checkpoint_file<float>(f.checkpoint);
        std::size_t AK = params.at("cls_head.w").dim(0);
        pcfg.num_classes = static_cast<int>(AK / static_cast<std::size_t>(pcfg.anchors_per_cell()));
    } else {
        params = init_detector_params<float>(pcfg, f.cfg.seed);
    }
    std::size_t S = f.cfg.synth.image_size;
    Rng rng(f.cfg.seed);
    Tensorf image({3, S, S});
    for (float& v : image.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    auto work = [&] {
        if (f.exclude_postprocess) {
            Tensorf batch({1, 3, S, S}, image.data);
            Graph<float> g;
            detector_forward(g, batch, params, pcfg);
        } else {
            predict(params, image, pcfg, f.cfg.score_thr);
        }
    };
    FpsStats st = fps_benchmark(work, f.warmup, f.runs, steady_clock_seconds());
    fs::create_directories(f.cfg.output_dir);
    std::ofstream os(f.cfg.output_dir + "/fps.csv");
    write_fps_csv(os, st);
    std::cout << "mean_fps = " << st.mean_fps << " (std " << st.std_fps << ") over "
              << st.measured_runs << " runs\n";
    return 0;
}

int cmd_cdf(Flags& f) {
    f.cfg.validate();
    Dataset ds = load_dataset(f.cfg.dataset, f.split, f.cfg.include_lost);
    PyramidConfig pcfg = pyramid_for(ds);
    ParamMap<float> params = load_checkpoint_file<float>(f.checkpoint);
    std::vector<double> gammas;
    std::stringstream gs(f.gammas);
    std::string tok;
    while (std::getline(gs, tok, ','))
        if (!tok.empty()) gammas.push_back(std::stod(tok));
    if (gammas.empty()) throw std::runtime_error("--gammas produced an empty list");
    std::vector<LogitSample> pop =
        collect_logit_samples(params, ds.samples, pcfg, f.cfg.pos_thr, f.cfg.neg_thr);
    std::vector<CdfCurve> curves = cdf_gamma_sweep(pop, gammas, f.cfg.alpha);
    fs::create_directories(f.cfg.output_dir);
    std::ofstream os(f.cfg.output_dir + "/cdf.csv");
    write_cdf_csv(os, curves);
    std::cout << "wrote " << curves.size() << " curves to " << f.cfg.output_dir << "/cdf.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dense one-stage object detection at desk scale"};
    app.name("ddet");
    app.require_subcommand(1);
    Flags f;

    CLI::App* synth = app.add_subcommand("synth", "Generate a synthetic shapes dataset");
    add_config_flag(synth, f);
    add_run_flags(synth, f);
    synth->add_option("--image-size", f.cfg.synth.image_size, "Square image size (multiple of 16)")
        ->capture_default_str();
    synth->add_option("--train-images", f.cfg.synth.train_images, "Training image count")
        ->capture_default_str();
    synth->add_option("--test-images", f.cfg.synth.test_images, "Held-out image count")
        ->capture_default_str();
    synth->add_option("--min-objects", f.cfg.synth.min_objects, "Min objects per image")
        ->capture_default_str();
    synth->add_option("--max-objects", f.cfg.synth.max_objects, "Max objects per image")
        ->capture_default_str();
    synth->add_option("--noise", f.cfg.synth.noise, "Background noise amplitude in [0,1]")
        ->capture_default_str();

    CLI::App* train = app.add_subcommand("train", "Train the detector");
    add_config_flag(train, f);
    add_run_flags(train, f);
    add_train_flags(train, f);

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint (mAP, PR curves)");
    add_config_flag(eval, f);
    add_run_flags(eval, f);
    eval->add_option("--dataset", f.cfg.dataset, "Dataset root directory")->required();
    eval->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    eval->add_option("--split", f.split, "Video id / split name")->capture_default_str();
    eval->add_option("--score-thr", f.cfg.score_thr, "Score threshold")->capture_default_str();
    eval->add_flag("--eleven-point", f.cfg.eleven_point, "11-point interpolated AP");
    eval->add_flag("--include-lost", f.cfg.include_lost, "Keep lost=1 boxes in eval GT");

    CLI::App* detect = app.add_subcommand("detect", "Run inference, write CSV and overlays");
    add_config_flag(detect, f);
    add_run_flags(detect, f);
    detect->add_option("--dataset", f.cfg.dataset, "Dataset root directory")->required();
    detect->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    detect->add_option("--split", f.split, "Video id / split name")->capture_default_str();
    detect->add_option("--score-thr", f.cfg.score_thr, "Score threshold")->capture_default_str();

    CLI::App* bench = app.add_subcommand("bench", "Measure single-image inference FPS");
    add_config_flag(bench, f);
    add_run_flags(bench, f);
    bench->add_option("--checkpoint", f.checkpoint, "Checkpoint file (fresh init if absent)");
    bench->add_option("--image-size", f.cfg.synth.image_size, "Square image size")
        ->capture_default_str();
    bench->add_option("--warmup", f.warmup, "Warmup runs (untimed)")->capture_default_str();
    bench->add_option("--runs", f.runs, "Measured runs")->capture_default_str();
    bench->add_flag("--exclude-postprocess", f.exclude_postprocess,
                    "Time features+heads only (no decode/NMS)");

    CLI::App* cdf = app.add_subcommand("cdf", "Normalized-loss CDF diagnostic over gamma");
    add_config_flag(cdf, f);
    add_run_flags(cdf, f);
    cdf->add_option("--dataset", f.cfg.dataset, "Dataset root directory")->required();
    cdf->add_option("--checkpoint", f.checkpoint, "Checkpoint file")->required();
    cdf->add_option("--split", f.split, "Video id / split name")->capture_default_str();
    cdf->add_option("--gammas", f.gammas, "Comma-separated gamma values")->capture_default_str();
    cdf->add_option("--alpha", f.cfg.alpha, "Alpha used for every curve")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        merge_config_file(cmd, f);
        if (cmd == synth) return cmd_synth(f);
        if (cmd == train) return cmd_train(f);
        if (cmd == eval) return cmd_eval(f);
        if (cmd == detect) return cmd_detect(f);
        if (cmd == bench) return cmd_bench(f);
        if (cmd == cdf) return cmd_cdf(f);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
