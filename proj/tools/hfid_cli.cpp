// Command-line front end over the hfid C API.

#include <hfid.h>

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

namespace {

struct ConfigDeleter {
    void operator()(hfid_config* c) const { hfid_config_destroy(c); }
};
using ConfigPtr = std::unique_ptr<hfid_config, ConfigDeleter>;

int fail(hfid_status status) {
    std::fprintf(stderr, "error (%s): %s\n", hfid_status_name(status), hfid_last_error());
    return 1;
}

#define CHECK_OK(call)                                                                         \
    do {                                                                                       \
        hfid_status status_ = (call);                                                          \
        if (status_ != HFID_OK)                                                                \
            return fail(status_);                                                              \
    } while (0)

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hfid: source color laser printer identification from halftone structure"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_given = false;
    bool verbose = false;
    app.add_option("--config", config_path, "key=value configuration file");
    app.add_option("--set", overrides, "override a config key (key=value, repeatable)");
    app.add_option("--seed", seed, "global seed override")->each([&](const std::string&) {
        seed_given = true;
    });
    app.add_flag("-v,--verbose", verbose, "log stage progress to stderr");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic dataset");
    std::string synth_style = "synthetic", synth_out;
    synth->add_option("--style", synth_style,
                      "synthetic|real|hcd|hcd-eval|pi-train|eval|sweep");
    synth->add_option("--out", synth_out, "output dataset directory")->required();

    // train-refiner
    auto* tr = app.add_subcommand("train-refiner", "adversarially train the halftone refiner");
    std::string tr_synth, tr_real, tr_refiner = "refiner.hfck", tr_disc = "discriminator.hfck";
    tr->add_option("--synth", tr_synth, "synthetic dataset directory")->required();
    tr->add_option("--real", tr_real, "real-style dataset directory")->required();
    tr->add_option("--refiner-out", tr_refiner, "refiner checkpoint path");
    tr->add_option("--disc-out", tr_disc, "discriminator checkpoint path");

    // refine
    auto* refine = app.add_subcommand("refine", "refine a dataset with a trained refiner");
    std::string rf_data, rf_ckpt, rf_out;
    refine->add_option("--data", rf_data, "input dataset directory")->required();
    refine->add_option("--refiner", rf_ckpt, "refiner checkpoint")->required();
    refine->add_option("--out", rf_out, "refined dataset directory")->required();

    // train-hcd
    auto* th = app.add_subcommand("train-hcd", "train the halftone color decomposing net");
    std::string th_data, th_out = "hcd.hfck";
    th->add_option("--data", th_data, "refined dataset directory")->required();
    th->add_option("--out", th_out, "checkpoint path");

    // eval-decompose
    auto* ed = app.add_subcommand("eval-decompose",
                                  "PSNR/SSIM decomposition report vs the profile baseline");
    std::string ed_data, ed_ckpt, ed_out = "decomposition.tsv";
    ed->add_option("--data", ed_data, "held-out dataset directory")->required();
    ed->add_option("--hcd", ed_ckpt, "hcd checkpoint")->required();
    ed->add_option("--out", ed_out, "report path");

    // train-pi
    auto* tp = app.add_subcommand("train-pi", "train the printer identifying net");
    int tp_phase = 1;
    std::string tp_data, tp_init, tp_out = "pi.hfck";
    tp->add_option("--phase", tp_phase, "1 (from hcd) or 2 (augmented fine-tune)")
        ->check(CLI::IsMember({1, 2}));
    tp->add_option("--data", tp_data, "training composites dataset directory")->required();
    tp->add_option("--init", tp_init, "hcd checkpoint (phase 1) or phase-1 pi checkpoint")
        ->required();
    tp->add_option("--out", tp_out, "checkpoint path");

    // identify
    auto* id = app.add_subcommand("identify", "identify the source printer of an image");
    std::string id_image, id_ckpt;
    id->add_option("image", id_image, "input PNG")->required();
    id->add_option("--model", id_ckpt, "pi checkpoint")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "confusion matrix over a labeled dataset");
    std::string ev_data, ev_ckpt, ev_out = "confusion.tsv";
    ev->add_option("--data", ev_data, "labeled dataset directory")->required();
    ev->add_option("--model", ev_ckpt, "pi checkpoint")->required();
    ev->add_option("--out", ev_out, "report path");

    // robustness
    auto* rb = app.add_subcommand("robustness", "rotation/scaling robustness curves");
    std::string rb_data, rb_p1, rb_p2, rb_out = "robustness.tsv";
    rb->add_option("--data", rb_data, "sweep dataset directory")->required();
    rb->add_option("--phase1", rb_p1, "phase-1 pi checkpoint")->required();
    rb->add_option("--phase2", rb_p2, "phase-2 pi checkpoint")->required();
    rb->add_option("--out", rb_out, "report path");

    // run-all
    auto* ra = app.add_subcommand("run-all", "full pipeline into a run directory");
    std::string ra_dir;
    ra->add_option("--out", ra_dir, "run directory")->required();

    // config dump
    auto* cd = app.add_subcommand("config", "print the effective configuration");

    CLI11_PARSE(app, argc, argv);

    hfid_set_verbose(verbose ? 1 : 0);

    ConfigPtr config = [] {
        hfid_config* raw = nullptr;
        hfid_config_create(&raw);
        return ConfigPtr(raw);
    }();
    if (!config)
        return fail(HFID_ERR_INTERNAL);
    if (!config_path.empty())
        CHECK_OK(hfid_config_load(config.get(), config_path.c_str()));
    for (const std::string& kv : overrides) {
        size_t eq = kv.find('=');
        if (eq == std::string::npos) {
            std::fprintf(stderr, "--set expects key=value, got '%s'\n", kv.c_str());
            return 1;
        }
        CHECK_OK(hfid_config_set(config.get(), kv.substr(0, eq).c_str(),
                                 kv.substr(eq + 1).c_str()));
    }
    if (seed_given)
        CHECK_OK(hfid_config_set_seed(config.get(), seed));

    if (synth->parsed()) {
        CHECK_OK(hfid_synth(config.get(), synth_style.c_str(), synth_out.c_str()));
    } else if (tr->parsed()) {
        CHECK_OK(hfid_train_refiner(config.get(), tr_synth.c_str(), tr_real.c_str(),
                                    tr_refiner.c_str(), tr_disc.c_str()));
    } else if (refine->parsed()) {
        CHECK_OK(hfid_refine(config.get(), rf_data.c_str(), rf_ckpt.c_str(), rf_out.c_str()));
    } else if (th->parsed()) {
        CHECK_OK(hfid_train_hcd(config.get(), th_data.c_str(), th_out.c_str()));
    } else if (ed->parsed()) {
        CHECK_OK(hfid_eval_decompose(config.get(), ed_data.c_str(), ed_ckpt.c_str(),
                                     ed_out.c_str()));
    } else if (tp->parsed()) {
        CHECK_OK(hfid_train_pi(config.get(), tp_phase, tp_data.c_str(), tp_init.c_str(),
                               tp_out.c_str()));
    } else if (id->parsed()) {
        int printer = -1;
        double scores[64];
        size_t n_scores = 0;
        CHECK_OK(hfid_identify(id_ckpt.c_str(), id_image.c_str(), &printer, scores, 64,
                               &n_scores));
        std::printf("%s\t%d", id_image.c_str(), printer);
        for (size_t i = 0; i < n_scores && i < 64; ++i)
            std::printf("\t%.6f", scores[i]);
        std::printf("\n");
    } else if (ev->parsed()) {
        double image_acc = 0.0, block_acc = 0.0;
        CHECK_OK(hfid_evaluate(config.get(), ev_ckpt.c_str(), ev_data.c_str(), ev_out.c_str(),
                               &image_acc, &block_acc));
        std::printf("image_accuracy\t%.4f\nblock_accuracy\t%.4f\n", image_acc, block_acc);
    } else if (rb->parsed()) {
        CHECK_OK(hfid_robustness(config.get(), rb_p1.c_str(), rb_p2.c_str(), rb_data.c_str(),
                                 rb_out.c_str()));
    } else if (ra->parsed()) {
        double accuracy = 0.0;
        CHECK_OK(hfid_run_all(config.get(), ra_dir.c_str(), &accuracy));
        std::printf("final_image_accuracy\t%.6f\n", accuracy);
    } else if (cd->parsed()) {
        size_t need = 0;
        hfid_config_dump(config.get(), nullptr, 0, &need);
        std::vector<char> buf(need);
        CHECK_OK(hfid_config_dump(config.get(), buf.data(), buf.size(), nullptr));
        std::fputs(buf.data(), stdout);
    }
    return 0;
}
