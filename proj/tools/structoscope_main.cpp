#include "structoscope/config.hpp"
#include "structoscope/error.hpp"
#include "structoscope/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

enum ExitCode { kOk = 0, kValidation = 2, kData = 3, kInternal = 4 };

struct Overrides {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> slice;
    std::optional<std::string> corpus;
    std::optional<std::string> format;
    std::optional<std::string> segmentation;
    std::optional<std::string> marker;
    std::optional<double> p0;
    bool no_iqr = false;
    std::optional<int> k;
    std::optional<int> n_init;
    std::optional<int> n_bins;
    std::optional<int> medoids;
    std::optional<std::string> aggregation;
    bool normalize = false;
    std::optional<int> from;
    std::optional<int> to;
    std::optional<double> theta_low;
    std::optional<double> theta_high;
    std::optional<std::string> regime;
    std::optional<std::string> synth_mode;
    std::optional<int> n_docs;
    std::optional<int> seg_min;
    std::optional<int> seg_max;
    std::optional<std::vector<int>> planted;
};

structoscope::RunConfig build_config(const Overrides& o)
{
    using namespace structoscope;
    RunConfig c = o.config ? load_config(*o.config) : RunConfig{};
    apply_seed_env(c);
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.out) c.output = *o.out;
    if (o.threads) c.threads = *o.threads;
    if (o.slice) {
        const auto eq = o.slice->find('=');
        if (eq == std::string::npos) {
            throw ValidationError("--slice expects key=value");
        }
        c.slice = std::make_pair(o.slice->substr(0, eq), o.slice->substr(eq + 1));
    }
    if (o.corpus) c.corpus_path = *o.corpus;
    if (o.format) c.corpus_format = *o.format;
    if (o.segmentation) {
        auto mode = parse_segmentation_mode(*o.segmentation);
        if (!mode) {
            throw ValidationError("--segmentation must be auto, none, markers or bayesian_blocks");
        }
        c.segmentation.mode = *mode;
    }
    if (o.marker) c.segmentation.marker_pattern = *o.marker;
    if (o.p0) c.segmentation.p0 = *o.p0;
    if (o.no_iqr) c.segmentation.iqr = false;
    if (o.k) c.cluster.k = *o.k;
    if (o.n_init) c.cluster.n_init = *o.n_init;
    if (o.n_bins) c.grouping.n_bins = *o.n_bins;
    if (o.medoids) c.order.medoids = *o.medoids;
    if (o.aggregation) c.order.aggregation = *o.aggregation;
    if (o.normalize) c.order.normalize = true;
    if (o.from) c.position.from = *o.from;
    if (o.to) c.position.to = *o.to;
    if (o.theta_low) c.thresholds.theta_low = *o.theta_low;
    if (o.theta_high) c.thresholds.theta_high = *o.theta_high;
    if (o.regime) {
        auto r = parse_regime(*o.regime);
        if (!r) {
            throw ValidationError("--regime must be ordered, akp, reverse_akp or noisy");
        }
        c.synth.spec.regime = *r;
    }
    if (o.synth_mode) c.synth.mode = *o.synth_mode;
    if (o.n_docs) c.synth.spec.n_docs = *o.n_docs;
    if (o.seg_min) c.synth.spec.seg_min = *o.seg_min;
    if (o.seg_max) c.synth.spec.seg_max = *o.seg_max;
    if (o.planted) {
        if (o.planted->size() != 2) {
            throw ValidationError("--planted expects FROM,TO");
        }
        c.synth.spec.planted = std::make_pair((*o.planted)[0], (*o.planted)[1]);
    }
    return c;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"structoscope: structural convergence analysis of segmented corpora"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.set_version_flag("--version", "structoscope 0.3.0");

    Overrides o;
    app.add_option("-c,--config", o.config, "TOML config file")->check(CLI::ExistingFile);
    app.add_option("-o,--out", o.out, "output directory");
    app.add_option("--seed", o.seed, "run seed (STRUCTOSCOPE_SEED overrides the config file)");
    app.add_option("-j,--threads", o.threads, "worker threads");
    app.add_option("--slice", o.slice, "restrict grouping and analyses to genre=<tag> or domain=<name>");
    app.add_option("--corpus", o.corpus, "corpus path");
    app.add_option("--format", o.format, "jsonl, conllu_dir, subtitle_jsonl or sequences");
    app.add_option("--segmentation", o.segmentation, "auto, none, markers or bayesian_blocks");
    app.add_option("--marker", o.marker, "segment marker pattern (regex)");
    app.add_option("--p0", o.p0, "Bayesian Blocks false-alarm probability");
    app.add_flag("--no-iqr", o.no_iqr, "skip the segment-count outlier filter");
    app.add_option("-k,--clusters", o.k, "number of functional clusters");
    app.add_option("--n-init", o.n_init, "k-means restarts");
    app.add_option("--bins", o.n_bins, "number of evaluation groups");
    app.add_option("-m,--medoids", o.medoids, "medoids per group");
    app.add_option("--aggregation", o.aggregation, "mean or min over medoid pairs");
    app.add_flag("--normalize", o.normalize, "length-normalized edit distance");
    app.add_option("--from", o.from, "transition source label for position analysis");
    app.add_option("--to", o.to, "transition target label for position analysis");
    app.add_option("--theta-low", o.theta_low, "convergence threshold");
    app.add_option("--theta-high", o.theta_high, "divergence threshold");
    app.add_option("--regime", o.regime, "synthetic regime: ordered, akp, reverse_akp, noisy");
    app.add_option("--synth-mode", o.synth_mode, "synthetic output: tokens or sequences");
    app.add_option("--n-docs", o.n_docs, "synthetic document count");
    app.add_option("--seg-min", o.seg_min, "minimum synthetic segments per document");
    app.add_option("--seg-max", o.seg_max, "maximum synthetic segments per document");
    app.add_option("--planted", o.planted, "planted transition FROM,TO")->delimiter(',')->expected(2);

    static const std::pair<const char*, const char*> kCommands[] = {
        {"ingest", "load the corpus and write corpus.jsonl"},
        {"segment", "segment documents and drop segment-count outliers"},
        {"featurize", "per-segment feature matrix"},
        {"cluster", "k-means over segment features"},
        {"sequences", "block sequences and evaluation groups"},
        {"analyze-order", "medoid edit-distance analysis of transition order"},
        {"analyze-position", "Wasserstein analysis of transition positions"},
        {"classify", "ordered / akp / reverse_akp / noisy verdicts"},
        {"synth", "generate a synthetic corpus with a planted regime"},
        {"report", "summarize results as report.md"},
        {"all", "run every analysis stage in order"},
    };
    for (const auto& [name, help] : kCommands) {
        app.add_subcommand(name, help);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        structoscope::Pipeline pipeline(build_config(o));
        pipeline.run(command);
    } catch (const structoscope::ValidationError& e) {
        std::cerr << "structoscope " << command << ": " << e.what() << "\n";
        return kValidation;
    } catch (const structoscope::DataError& e) {
        std::cerr << "structoscope " << command << ": " << e.what() << "\n";
        return kData;
    } catch (const std::exception& e) {
        std::cerr << "structoscope " << command << ": internal error: " << e.what() << "\n";
        return kInternal;
    }
    return kOk;
}
