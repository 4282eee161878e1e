// Copyright Contributors to the EgoGS Project
// SPDX-License-Identifier: Apache-2.0

// Command-line front end: synthetic data generation, the full pipeline,
// evaluation, rendering and pose-track export.

#include "egogs/config.hpp"
#include "egogs/dataset.hpp"
#include "egogs/model_io.hpp"
#include "egogs/pipeline.hpp"
#include "egogs/rasterizer.hpp"
#include "egogs/scene_model.hpp"
#include "egogs/synthetic.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace egogs;

namespace {

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Load, "cannot write " + path.string());
    out << text;
}

// Runs `body` and reports failures on stderr, naming the pipeline stage when known.
int guarded(const std::string &command, const std::function<void()> &body) {
    try {
        body();
        return 0;
    } catch (const StageError &e) {
        std::cerr << command << " failed in stage " << e.stage() << " (" << to_string(e.kind()) << "): " << e.what()
                  << "\n";
    } catch (const Error &e) {
        std::cerr << command << " failed (" << to_string(e.kind()) << "): " << e.what() << "\n";
    } catch (const std::exception &e) {
        std::cerr << command << " failed: " << e.what() << "\n";
    }
    return 1;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Egocentric Gaussian splatting: reconstruction and object tracking"};
    app.require_subcommand(1);

    // generate
    auto *gen = app.add_subcommand("generate", "Write a synthetic pick-and-place dataset");
    std::string gen_out;
    std::uint64_t gen_seed = 0;
    int gen_frames = 100, gen_onset = 40, gen_offset = 69, gen_size = 64;
    double gen_noise = 0.0;
    gen->add_option("--output", gen_out, "Dataset directory")->required();
    gen->add_option("--seed", gen_seed, "Generator seed");
    gen->add_option("--frames", gen_frames, "Number of frames");
    gen->add_option("--onset", gen_onset, "First frame of the interaction");
    gen->add_option("--offset", gen_offset, "Last frame of the interaction");
    gen->add_option("--size", gen_size, "Image width and height in pixels");
    gen->add_option("--noise", gen_noise, "Per-channel Gaussian pixel noise");

    // run
    auto *run = app.add_subcommand("run", "Run the full pipeline on a dataset");
    std::string run_data, run_config, run_out;
    std::optional<std::uint64_t> run_seed;
    std::optional<int> run_k;
    bool run_no_finetune = false, run_quiet = false;
    run->add_option("--dataset", run_data, "Path to manifest.json")->required();
    run->add_option("--config", run_config, "JSON config (defaults when omitted)");
    run->add_option("--seed", run_seed, "Override the config seed");
    run->add_option("--step-k", run_k, "Pose knot spacing in video frames");
    run->add_flag("--no-finetune", run_no_finetune, "Skip the final joint fine-tuning");
    run->add_flag("--quiet", run_quiet, "Suppress progress output");
    run->add_option("--output", run_out, "Output directory")->required();

    // evaluate
    auto *eval = app.add_subcommand("evaluate", "Score an exported model on a dataset's held-out frames");
    std::string eval_data, eval_model, eval_out;
    int eval_dilation = 2;
    eval->add_option("--dataset", eval_data, "Path to manifest.json")->required();
    eval->add_option("--model", eval_model, "Exported model directory")->required();
    eval->add_option("--dilation", eval_dilation, "Body mask dilation in pixels");
    eval->add_option("--output", eval_out, "Metrics file (stdout when omitted)");

    // render
    auto *rend = app.add_subcommand("render", "Render an exported model from a dataset camera");
    std::string rend_data, rend_model, rend_out;
    int rend_frame = 0;
    rend->add_option("--dataset", rend_data, "Path to manifest.json")->required();
    rend->add_option("--model", rend_model, "Exported model directory")->required();
    rend->add_option("--frame", rend_frame, "Frame index")->required();
    rend->add_option("--output", rend_out, "PNG path")->required();

    // export-track
    auto *track = app.add_subcommand("export-track", "Write the object pose track of an exported model");
    std::string track_model, track_out;
    track->add_option("--model", track_model, "Exported model directory")->required();
    track->add_option("--output", track_out, "Track JSON path")->required();

    CLI11_PARSE(app, argc, argv);

    if (*gen)
        return guarded("generate", [&] {
            SyntheticSceneSpec spec;
            spec.seed = gen_seed;
            spec.num_frames = gen_frames;
            spec.interactions = {{gen_onset, gen_offset}};
            spec.width = spec.height = gen_size;
            spec.focal = gen_size;
            spec.noise = gen_noise;
            const fs::path manifest = write_synthetic(generate_synthetic(spec), gen_out);
            std::cout << manifest.string() << "\n";
        });

    if (*run)
        return guarded("run", [&] {
            PipelineConfig cfg = run_config.empty() ? PipelineConfig{} : load_config(run_config);
            if (run_seed) cfg.seed = *run_seed;
            if (run_k) cfg.dynamic_stage.step_k = *run_k;
            if (run_no_finetune) cfg.finetune = false;
            const Dataset dataset = load_dataset(run_data);
            ProgressFn progress;
            if (!run_quiet) progress = [](const std::string &msg) { std::cerr << msg << "\n"; };
            fs::create_directories(run_out);
            const PipelineResult result = [&] {
                try {
                    return run_pipeline(dataset, cfg, progress);
                } catch (const StageError &e) {
                    if (e.checkpoint()) {
                        const fs::path ckpt = fs::path(run_out) / "checkpoint.ply";
                        write_ply(*e.checkpoint(), ckpt);
                        std::cerr << "last finite cloud written to " << ckpt.string() << "\n";
                    }
                    throw;
                }
            }();
            export_model(result.model, fs::path(run_out) / "model");
            write_track(result.model.track, fs::path(run_out) / "track.json");
            write_text(fs::path(run_out) / "metrics.txt", result.metrics.to_text());
            write_text(fs::path(run_out) / "config.json", config_to_json(cfg));
            std::string log;
            for (const auto &line : result.provenance) log += line + "\n";
            write_text(fs::path(run_out) / "provenance.log", log);
            const std::string text = result.metrics.to_text();
            std::cout << text.substr(0, text.find("static.frames"));
        });

    if (*eval)
        return guarded("evaluate", [&] {
            const Dataset dataset = load_dataset(eval_data);
            const SceneModel model = import_model(eval_model);
            const std::string text = evaluate(model, dataset, eval_dilation).to_text();
            if (eval_out.empty())
                std::cout << text;
            else
                write_text(eval_out, text);
        });

    if (*rend)
        return guarded("render", [&] {
            const Dataset dataset = load_dataset(rend_data);
            if (rend_frame < 0 || rend_frame >= static_cast<int>(dataset.frames.size()))
                throw Error(ErrorKind::OutOfRange, "frame " + std::to_string(rend_frame) + " is not in the dataset");
            const SceneModel model = import_model(rend_model);
            const CameraFrame &frame = dataset.frames[rend_frame];
            const RenderOutput out = render_scene(model, frame.camera, rend_frame, RenderMode::Color);
            write_png_rgb(rend_out, out.color);
        });

    if (*track)
        return guarded("export-track", [&] {
            write_track(import_model(track_model).track, track_out);
        });
    return 0;
}
