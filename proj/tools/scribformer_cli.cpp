// scribformer: synth | train | eval | visualize

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "scribformer/commands.hpp"

using namespace scribformer;

int main(int argc, char** argv) {
    CLI::App app{"Scribble-supervised segmentation with a hybrid CNN/Transformer network"};
    app.require_subcommand(1);

    cmd::SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
    synth->add_option("--out", sa.out, "Output directory")->required();
    synth->add_option("--seed", sa.spec.seed, "Generator seed");
    synth->add_option("--train", sa.spec.num_train, "Training samples");
    synth->add_option("--val", sa.spec.num_val, "Validation samples");
    synth->add_option("--test", sa.spec.num_test, "Test samples");
    synth->add_option("--classes", sa.spec.num_classes, "Classes including background");
    synth->add_option("--size", sa.spec.image_size, "Image side length");
    synth->add_option("--coverage", sa.spec.scribble_coverage, "Scribble pixels per class as a fraction of its area");
    synth->add_flag("--force", sa.force, "Replace a non-empty output directory");

    cmd::TrainArgs ta;
    std::string config_path;
    auto& ov = ta.overrides;
    auto* train = app.add_subcommand("train", "Train a model and write a run directory");
    train->add_option("--config", config_path, "INI run configuration");
    train->add_option("--preset", ta.preset, "Base scale: desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    train->add_option("--data", ov.data, "Dataset root (overrides data.root)");
    train->add_option("--out", ta.out, "Run directory")->required();
    train->add_option("--epochs", ov.epochs);
    train->add_option("--batch-size", ov.batch_size);
    train->add_option("--lr", ov.learning_rate);
    train->add_option("--weight-decay", ov.weight_decay);
    train->add_option("--seed", ov.seed);
    train->add_option("--image-size", ov.image_size);
    train->add_option("--lambda1", ov.lambda1);
    train->add_option("--lambda2", ov.lambda2);
    train->add_option("--lambda3", ov.lambda3);
    train->add_option("--omega", ov.omega, "Four comma-separated ACAM stage weights");
    train->add_option("--alpha", ov.alpha, "'dynamic' or a fixed mixing weight in (0,1)");
    train->add_flag("--no-transformer", ov.no_transformer, "CNN-only ablation");
    train->add_flag("--no-acam", ov.no_acam, "Disable the ACAM branch");
    train->add_flag("--resume", ta.resume, "Continue from the run's last checkpoint");
    train->add_flag("--quiet", ta.quiet, "No per-epoch progress lines");

    cmd::EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "Score a trained run on a dataset split");
    eval->add_option("--run", ea.run, "Run directory")->required();
    eval->add_option("--data", ea.data, "Dataset root (default: the run's data.root)");
    eval->add_option("--split", ea.split);
    eval->add_option("--checkpoint", ea.checkpoint, "best or last");
    eval->add_option("--out", ea.out, "Report path (default: <run>/eval_report.json)");
    eval->add_option("--boxplot", ea.boxplot, "Write a per-case Dice box plot PNG");

    cmd::VisualizeArgs va;
    auto* vis = app.add_subcommand("visualize", "Render ACAM heatmaps and prediction overlays");
    vis->add_option("--run", va.run, "Run directory")->required();
    vis->add_option("--data", va.data, "Dataset root (default: the run's data.root)");
    vis->add_option("--split", va.split);
    vis->add_option("--ids", va.ids, "Sample ids (space or comma separated)")->required()->delimiter(',');
    vis->add_option("--checkpoint", va.checkpoint, "best or last");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << cmd::error_line("usage", e.what()) << std::endl;
        return 2;
    }

    try {
        if (*synth) {
            cmd::synth(sa);
        } else if (*train) {
            if (!config_path.empty()) ta.config = config_path;
            cmd::train(ta);
        } else if (*eval) {
            const auto report = cmd::evaluate_run(ea);
            std::cout << "mean dice " << report["mean_dice"].get<double>() << std::endl;
        } else if (*vis) {
            for (const auto& p : cmd::visualize(va)) std::cout << p.string() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << cmd::error_line(e.kind(), e.what()) << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << cmd::error_line("internal", e.what()) << std::endl;
        return 1;
    }
    return 0;
}
