#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ncd/config.hpp"
#include "ncd/pipeline.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "Run configuration JSON")->required();
    cmd->add_option("--out", args.out_dir, "Output directory")->required();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Two-stage novel category discovery pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args, stage1_args, stage2_args, eval_args;
    std::string stage2_ckpt, eval_ckpt;

    CLI::App* synth = app.add_subcommand("synth", "Generate a dataset on disk");
    add_common(synth, synth_args);

    CLI::App* stage1 = app.add_subcommand("stage1", "Prototypical representation learning");
    add_common(stage1, stage1_args);

    CLI::App* stage2 = app.add_subcommand("stage2", "Prototypical self-training");
    add_common(stage2, stage2_args);
    stage2->add_option("--checkpoint", stage2_ckpt, "Stage-1 checkpoint directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    add_common(eval, eval_args);
    eval->add_option("--checkpoint", eval_ckpt, "Checkpoint directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            ncd::cmd_synth(ncd::load_config(synth_args.config_path), synth_args.out_dir);
        } else if (stage1->parsed()) {
            ncd::cmd_stage1(ncd::load_config(stage1_args.config_path), stage1_args.out_dir);
        } else if (stage2->parsed()) {
            ncd::cmd_stage2(ncd::load_config(stage2_args.config_path), stage2_ckpt,
                            stage2_args.out_dir);
        } else if (eval->parsed()) {
            ncd::cmd_eval(ncd::load_config(eval_args.config_path), eval_ckpt,
                          eval_args.out_dir);
        }
    } catch (const ncd::ConfigInvalid& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ncd::CheckpointMissing& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 2;
    } catch (const ncd::IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
