// hyperdest: destination-prediction pipeline for GPS taxi trajectories.
//
// Subcommands: preprocess, sample-refs, train, eval, export-embeddings,
// synth, compare. Exit codes: 0 success, 1 usage error, 2 data error,
// 3 numerical failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "hyperdest/encode.hpp"
#include "hyperdest/eval.hpp"
#include "hyperdest/export.hpp"
#include "hyperdest/ingest.hpp"
#include "hyperdest/model.hpp"
#include "hyperdest/preprocess.hpp"
#include "hyperdest/synth.hpp"
#include "hyperdest/train.hpp"

namespace hd = hyperdest;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

hd::encode::TimescaleMask parse_timescales(const std::string& spec) {
    hd::encode::TimescaleMask mask{false, false, false};
    std::istringstream in(spec);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        if (tok == "day") {
            mask.day = true;
        } else if (tok == "week") {
            mask.week = true;
        } else if (tok == "year") {
            mask.year = true;
        } else if (!tok.empty()) {
            throw CLI::ValidationError("--timescales",
                                       "unknown timescale '" + tok + "'");
        }
    }
    return mask;
}

void log_config(const std::string& cmd, const std::string& detail) {
    std::cerr << "[hyperdest] " << cmd << ": " << detail << '\n';
}

int run_preprocess(const std::string& in_path, const std::string& out_path,
                   const std::string& reject_path,
                   const hd::preprocess::PreprocessConfig& cfg,
                   double min_dur, double max_dur, double max_speed,
                   double tau_max, double interval,
                   const std::vector<double>& bbox) {
    hd::preprocess::PreprocessConfig c = cfg;
    c.min_duration_s = min_dur;
    c.max_duration_s = max_dur;
    c.max_speed_kmh = max_speed;
    c.tau_max = tau_max;
    c.interval_s = interval;
    if (!bbox.empty()) {
        c.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
    }
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "error: cannot open " << in_path << '\n';
        return kExitData;
    }
    std::vector<hd::ingest::RejectEntry> rejects;
    std::vector<hd::Trajectory> trajectories;
    hd::ingest::parse_csv(
        in,
        [&](hd::ingest::RawTrip trip) {
            if (auto t = hd::ingest::to_trajectory(trip)) {
                trajectories.push_back(std::move(*t));
            }
        },
        &rejects);

    auto [kept, report] = hd::preprocess::run_pipeline(trajectories, c);
    hd::save_corpus(out_path, kept);
    if (!reject_path.empty()) {
        std::ofstream rf(reject_path);
        hd::ingest::write_reject_log(rf, rejects);
    }
    std::cout << "input=" << report.input
              << " removed_duration=" << report.removed_duration
              << " removed_speed=" << report.removed_speed
              << " removed_area=" << report.removed_area
              << " removed_roundtrip=" << report.removed_roundtrip
              << " smoothed=" << report.smoothed << " output=" << report.output
              << " rejected_rows=" << rejects.size() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hyperdest: trainable destination prediction for GPS taxi trajectories"};
    app.require_subcommand(1);
    app.set_config("--config", "", "plain key=value config file; flags override");
    app.allow_config_extras(true);

    // --- preprocess ---
    auto* sc_pre = app.add_subcommand("preprocess", "filter a Porto-format CSV into a corpus");
    std::string pre_in, pre_out, pre_rejects;
    hd::preprocess::PreprocessConfig pre_defaults;
    double min_dur = pre_defaults.min_duration_s, max_dur = pre_defaults.max_duration_s;
    double max_speed = pre_defaults.max_speed_kmh, tau_max = pre_defaults.tau_max;
    double interval = pre_defaults.interval_s;
    std::vector<double> bbox;
    sc_pre->add_option("--in", pre_in, "input CSV")->required()->envname("HYPERDEST_IN");
    sc_pre->add_option("--out", pre_out, "output corpus file")->required()->envname("HYPERDEST_OUT");
    sc_pre->add_option("--rejects", pre_rejects, "reject log path");
    sc_pre->add_option("--min-duration-s", min_dur, "drop if duration <= this")->capture_default_str();
    sc_pre->add_option("--max-duration-s", max_dur, "drop if duration >= this")->capture_default_str();
    sc_pre->add_option("--max-speed-kmh", max_speed)->capture_default_str();
    sc_pre->add_option("--tau-max", tau_max, "keep iff roundtrip factor < this")->capture_default_str();
    sc_pre->add_option("--interval-s", interval, "inter-point sampling interval")->capture_default_str();
    sc_pre->add_option("--bbox", bbox, "min_lat max_lat min_lon max_lon")->expected(4);

    // --- sample-refs ---
    auto* sc_refs = app.add_subcommand("sample-refs", "sample reference points from a corpus");
    std::string refs_corpus, refs_out;
    std::size_t refs_n = 4096;
    double refs_min_sep = 0.1;
    std::uint64_t refs_seed = 0;
    sc_refs->add_option("--corpus", refs_corpus)->required();
    sc_refs->add_option("--out", refs_out)->required();
    sc_refs->add_option("--n", refs_n)->capture_default_str();
    sc_refs->add_option("--min-sep-km", refs_min_sep)->capture_default_str();
    sc_refs->add_option("--seed", refs_seed)->capture_default_str()->envname("HYPERDEST_SEED");

    // --- train ---
    auto* sc_train = app.add_subcommand("train", "train a model on a corpus");
    std::string tr_corpus, tr_refs, tr_ckpt, tr_losslog, tr_variant = "post-lstm";
    std::string tr_timescales = "day,week,year";
    hd::train::TrainConfig tr_cfg;
    std::size_t tr_m = 16, tr_hidden = 64, tr_penult = 128;
    sc_train->add_option("--corpus", tr_corpus)->required();
    sc_train->add_option("--refs", tr_refs)->required();
    sc_train->add_option("--out", tr_ckpt, "checkpoint path")->required();
    sc_train->add_option("--loss-log", tr_losslog, "loss log CSV path");
    sc_train->add_option("--variant", tr_variant,
                         "pre-lstm|hyper-lstm|post-lstm|concat|naive")
        ->capture_default_str();
    sc_train->add_option("--timescales", tr_timescales, "subset of day,week,year")
        ->capture_default_str();
    sc_train->add_option("--epochs", tr_cfg.epochs)->capture_default_str()
        ->check(CLI::PositiveNumber);
    sc_train->add_option("--batch-size", tr_cfg.batch_size)->capture_default_str();
    sc_train->add_option("--lr", tr_cfg.learning_rate)->capture_default_str();
    sc_train->add_option("--clip-norm", tr_cfg.clip_norm)->capture_default_str();
    sc_train->add_option("--seed", tr_cfg.seed)->capture_default_str()->envname("HYPERDEST_SEED");
    sc_train->add_option("--embed-dim", tr_m)->capture_default_str();
    sc_train->add_option("--hidden", tr_hidden)->capture_default_str();
    sc_train->add_option("--penult", tr_penult)->capture_default_str();

    // --- eval ---
    auto* sc_eval = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    std::string ev_ckpt, ev_refs, ev_corpus, ev_csv;
    sc_eval->add_option("--checkpoint", ev_ckpt)->required();
    sc_eval->add_option("--refs", ev_refs)->required();
    sc_eval->add_option("--corpus", ev_corpus)->required();
    sc_eval->add_option("--csv", ev_csv, "also write report CSV here");

    // --- export-embeddings ---
    auto* sc_exp = app.add_subcommand("export-embeddings",
                                      "project E_ref to colors, CSV lat,lon,r,g,b");
    std::string ex_ckpt, ex_refs, ex_out;
    sc_exp->add_option("--checkpoint", ex_ckpt)->required();
    sc_exp->add_option("--refs", ex_refs)->required();
    sc_exp->add_option("--out", ex_out)->required();

    // --- synth ---
    auto* sc_synth = app.add_subcommand("synth", "generate a synthetic corpus");
    hd::synth::SynthConfig sy_cfg;
    std::string sy_out;
    sc_synth->add_option("--out", sy_out)->required();
    sc_synth->add_option("--n", sy_cfg.n_trajectories)->capture_default_str();
    sc_synth->add_option("--hotspots", sy_cfg.n_hotspots)->capture_default_str();
    sc_synth->add_option("--kappa", sy_cfg.affinity_sharpness)->capture_default_str();
    sc_synth->add_option("--noise-km", sy_cfg.noise_km)->capture_default_str();
    sc_synth->add_option("--speed-kmh", sy_cfg.speed_kmh)->capture_default_str();
    sc_synth->add_option("--seed", sy_cfg.seed)->capture_default_str()->envname("HYPERDEST_SEED");

    // --- compare ---
    auto* sc_cmp = app.add_subcommand("compare", "tabulate report CSVs side by side");
    std::vector<std::string> cmp_files;
    sc_cmp->add_option("files", cmp_files, "report CSV files")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc_pre->parsed()) {
            return run_preprocess(pre_in, pre_out, pre_rejects, pre_defaults,
                                  min_dur, max_dur, max_speed, tau_max,
                                  interval, bbox);
        }
        if (sc_refs->parsed()) {
            auto corpus = hd::load_corpus(refs_corpus);
            auto refs = hd::encode::sample_references(corpus, refs_n,
                                                      refs_min_sep, refs_seed);
            hd::encode::save_references(refs_out, refs);
            log_config("sample-refs", "n=" + std::to_string(refs.size()) +
                                          " seed=" + std::to_string(refs_seed));
            return kExitOk;
        }
        if (sc_train->parsed()) {
            auto corpus = hd::load_corpus(tr_corpus);
            if (corpus.empty()) {
                std::cerr << "error: empty corpus\n";
                return kExitData;
            }
            auto refs = hd::encode::load_references(tr_refs);
            tr_cfg.spec.variant = hd::model::variant_from_name(tr_variant);
            tr_cfg.spec.mask = parse_timescales(tr_timescales);
            tr_cfg.spec.embed_dim = tr_m;
            tr_cfg.spec.hidden = tr_hidden;
            tr_cfg.spec.penult = tr_penult;
            tr_cfg.spec.n_ref = refs.size();
            auto vocabs = hd::encode::build_vocabs(corpus);
            hd::train::TrainResult result;
            try {
                result = hd::train::train(corpus, refs, vocabs, tr_cfg);
            } catch (const std::runtime_error& e) {
                if (std::string(e.what()).find("non-finite") != std::string::npos) {
                    throw NumericalFailure(e.what());
                }
                throw;
            }
            hd::train::AdamOptimizer opt(result.params.learnable(), tr_cfg);
            auto ckpt = hd::train::make_checkpoint(result.params, opt, tr_cfg,
                                                   refs, vocabs);
            hd::train::save_checkpoint(tr_ckpt, ckpt);
            if (!tr_losslog.empty()) {
                std::ofstream lf(tr_losslog);
                hd::train::write_loss_log(lf, result.log);
            }
            log_config("train", ckpt.config_echo);
            for (std::size_t e = 0; e < result.epoch_mean_loss.size(); ++e) {
                std::cout << "epoch " << e << " mean_loss_km "
                          << result.epoch_mean_loss[e] << '\n';
            }
            return kExitOk;
        }
        if (sc_eval->parsed()) {
            auto ckpt = hd::train::load_checkpoint(ev_ckpt);
            auto refs = hd::encode::load_references(ev_refs);
            auto corpus = hd::load_corpus(ev_corpus);
            auto [params, vocabs] = hd::train::restore_model(ckpt, refs);
            auto report = hd::eval::evaluate(params, refs, vocabs, corpus);
            std::cout << hd::eval::compare({report});
            if (!ev_csv.empty()) {
                std::ofstream cf(ev_csv);
                cf << hd::eval::report_csv({report});
            }
            return kExitOk;
        }
        if (sc_exp->parsed()) {
            auto ckpt = hd::train::load_checkpoint(ex_ckpt);
            auto refs = hd::encode::load_references(ex_refs);
            auto [params, vocabs] = hd::train::restore_model(ckpt, refs);
            auto colored =
                hd::exporter::color_references(refs, params.e_ref->value);
            std::ofstream out(ex_out);
            if (!out) throw std::runtime_error("cannot open " + ex_out);
            out << hd::exporter::colored_points_csv(colored);
            return kExitOk;
        }
        if (sc_synth->parsed()) {
            auto corpus = hd::synth::generate(sy_cfg);
            hd::save_corpus(sy_out, corpus, {sy_cfg.echo()});
            log_config("synth", sy_cfg.echo());
            return kExitOk;
        }
        if (sc_cmp->parsed()) {
            std::vector<hd::eval::EvalReport> reports;
            for (const auto& path : cmp_files) {
                std::ifstream f(path);
                if (!f) throw std::runtime_error("cannot open " + path);
                std::string line;
                std::getline(f, line);  // header
                while (std::getline(f, line)) {
                    if (!line.empty()) {
                        reports.push_back(hd::eval::parse_report_csv_row(line));
                    }
                }
            }
            std::cout << hd::eval::compare(reports);
            return kExitOk;
        }
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
