#include "structoscope/pipeline.hpp"

#include "structoscope/error.hpp"
#include "structoscope/lexicon.hpp"
#include "structoscope/segmentation.hpp"
#include "structoscope/synth.hpp"

#include "io_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <fcntl.h>
#include <limits>
#include <map>
#include <sstream>
#include <unistd.h>

namespace structoscope {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kLockName = ".structoscope.lock";
constexpr const char* kVersion = "0.3.0";

// Holds `<out>/.structoscope.lock` for the lifetime of a run. A lock left by
// a process that no longer exists is taken over.
class OutputLock {
public:
    explicit OutputLock(const fs::path& dir) : path_(dir / kLockName)
    {
        fs::create_directories(dir);
        for (int attempt = 0; attempt < 2; ++attempt) {
            const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
            if (fd >= 0) {
                const std::string pid = std::to_string(::getpid()) + "\n";
                [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
                ::close(fd);
                held_ = true;
                return;
            }
            if (errno != EEXIST) {
                throw DataError("cannot create lock file " + path_.string());
            }
            long owner = 0;
            try {
                owner = std::stol(std::string(detail::trim(detail::read_text_file(path_))));
            } catch (const std::exception&) {
                owner = 0;
            }
            if (owner > 0 && ::kill(static_cast<pid_t>(owner), 0) == 0) {
                throw DataError("output directory " + dir.string() + " is in use by process "
                                + std::to_string(owner) + " (" + path_.string() + ")");
            }
            std::error_code ec;
            fs::remove(path_, ec);
        }
        throw DataError("cannot acquire lock " + path_.string());
    }

    ~OutputLock()
    {
        if (held_) {
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }

    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    fs::path path_;
    bool held_ = false;
};

json number_or_null(double v)
{
    return std::isfinite(v) ? json(v) : json();
}

double number_or_nan(const json& j)
{
    return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

json matrix_json(const DistanceMatrix& m)
{
    json rows = json::array();
    for (std::size_t i = 0; i < m.n; ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < m.n; ++j) {
            row.push_back(number_or_null(m(i, j)));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

DistanceMatrix matrix_from_json(const json& rows, const fs::path& source)
{
    if (!rows.is_array()) {
        throw DataError(source.string() + ": field 'matrix' must be an array of rows");
    }
    DistanceMatrix m(rows.size());
    for (std::size_t i = 0; i < m.n; ++i) {
        if (!rows[i].is_array() || rows[i].size() != m.n) {
            throw DataError(source.string() + ": field 'matrix' must be square");
        }
        for (std::size_t j = 0; j < m.n; ++j) {
            m(i, j) = number_or_nan(rows[i][j]);
        }
    }
    return m;
}

json vector_json(const std::vector<double>& v)
{
    json out = json::array();
    for (double x : v) {
        out.push_back(number_or_null(x));
    }
    return out;
}

std::vector<double> vector_from_json(const json& arr)
{
    std::vector<double> out;
    for (const auto& v : arr) {
        out.push_back(number_or_nan(v));
    }
    return out;
}

void write_json(const fs::path& path, const json& j)
{
    detail::write_text_file(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path)
{
    try {
        return json::parse(detail::read_text_file(path));
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

std::vector<std::string> group_labels(std::size_t n)
{
    std::vector<std::string> labels;
    for (std::size_t g = 0; g < n; ++g) {
        labels.push_back("group_" + std::to_string(g));
    }
    return labels;
}

void require(const fs::path& path, std::string_view stage)
{
    if (!fs::exists(path)) {
        throw ValidationError("missing artifact " + path.string() + "; run the '" + std::string(stage)
                              + "' stage first");
    }
}

Lexicons make_lexicons(const RunConfig& c)
{
    if (c.stopwords) {
        return Lexicons::from_files(*c.stopwords, c.affect);
    }
    return Lexicons::builtin_english();
}

bool slice_keeps(const std::optional<std::pair<std::string, std::string>>& slice, const std::string& domain,
                 const std::vector<std::string>& tags)
{
    if (!slice) {
        return true;
    }
    if (slice->first == "domain") {
        return domain == slice->second;
    }
    return std::find(tags.begin(), tags.end(), slice->second) != tags.end();
}

GroupBlocks blocks_for(const RunConfig& c)
{
    GroupBlocks b = c.grouping.n_bins >= 6 ? GroupBlocks::for_bins(c.grouping.n_bins) : GroupBlocks{};
    if (c.grouping.high) {
        b.high = *c.grouping.high;
    }
    if (c.grouping.low) {
        b.low = *c.grouping.low;
    }
    return b;
}

json regime_json(const RegimeLabel& label)
{
    const auto& d = label.diagnostics;
    return {{"verdict", std::string(to_string(label.verdict))},
            {"diagnostics",
             {{"c_high", d.c_high},
              {"c_low", d.c_low},
              {"cross_hl", d.cross_hl},
              {"grand_mean", d.grand_mean},
              {"ref", d.ref},
              {"c_high_norm", d.c_high_norm},
              {"c_low_norm", d.c_low_norm},
              {"cross_ratio", d.cross_ratio}}}};
}

std::string fmt(double v)
{
    if (!std::isfinite(v)) {
        return "NA";
    }
    std::ostringstream ss;
    ss.setf(std::ios::fixed);
    ss.precision(4);
    ss << v;
    return ss.str();
}

std::string fmt_json(const json& v)
{
    return v.is_number() ? fmt(v.get<double>()) : "NA";
}

void markdown_matrix(std::ostringstream& md, const json& rows)
{
    const std::size_t n = rows.size();
    md << "| |";
    for (std::size_t j = 0; j < n; ++j) {
        md << " g" << j << " |";
    }
    md << "\n|---|";
    for (std::size_t j = 0; j < n; ++j) {
        md << "---|";
    }
    md << "\n";
    for (std::size_t i = 0; i < n; ++i) {
        md << "| g" << i << " |";
        for (std::size_t j = 0; j < n; ++j) {
            md << " " << fmt_json(rows[i][j]) << " |";
        }
        md << "\n";
    }
}

} // namespace

const std::vector<std::string>& pipeline_commands()
{
    static const std::vector<std::string> commands = {
        "ingest",   "segment",  "featurize", "cluster", "sequences", "analyze-order",
        "analyze-position", "classify", "synth", "report", "all"};
    return commands;
}

Pipeline::Pipeline(RunConfig config) : config_(std::move(config)), out_(config_.output) {}

Pipeline::~Pipeline() = default;

fs::path Pipeline::stage_dir() const
{
    if (!config_.slice) {
        return out_;
    }
    return out_ / ("slice-" + config_.slice->first + "-" + config_.slice->second);
}

bool Pipeline::sequence_input() const
{
    if (config_.corpus_path) {
        return config_.corpus_format == "sequences";
    }
    return !fs::exists(out_ / "synth" / "corpus.jsonl") && fs::exists(out_ / "synth" / "sequences.jsonl");
}

fs::path Pipeline::input_path() const
{
    if (config_.corpus_path) {
        return *config_.corpus_path;
    }
    // Without a configured corpus, fall back to the output of `synth`.
    for (const char* name : {"corpus.jsonl", "sequences.jsonl"}) {
        if (fs::exists(out_ / "synth" / name)) {
            return out_ / "synth" / name;
        }
    }
    throw ValidationError("corpus.path is not set and no synthetic corpus exists in " + (out_ / "synth").string()
                          + "; set [corpus] path or run 'synth' first");
}

void Pipeline::run(std::string_view command)
{
    const auto& cmds = pipeline_commands();
    if (std::find(cmds.begin(), cmds.end(), command) == cmds.end()) {
        throw ValidationError("unknown command '" + std::string(command) + "'");
    }
    validate_config(config_, command);
    seeds_ = resolve_seeds(config_);
    OutputLock lock(out_);
    if (command == "all") {
        for (const char* stage : {"ingest", "segment", "featurize", "cluster", "sequences", "analyze-order",
                                  "analyze-position", "classify", "report"}) {
            run_stage(stage);
        }
    } else {
        run_stage(command);
    }
    write_manifest();
}

void Pipeline::run_stage(std::string_view stage)
{
    if (stage == "ingest") ingest();
    else if (stage == "segment") segment();
    else if (stage == "featurize") featurize();
    else if (stage == "cluster") cluster();
    else if (stage == "sequences") sequences();
    else if (stage == "analyze-order") analyze_order();
    else if (stage == "analyze-position") analyze_position();
    else if (stage == "classify") classify();
    else if (stage == "report") report();
    else if (stage == "synth") synth();
}

// ---- stages ----------------------------------------------------------------

void Pipeline::ingest()
{
    const fs::path src = input_path();
    json info;
    if (sequence_input()) {
        auto records = read_sequences_jsonl(src);
        if (records.empty()) {
            throw DataError(src.string() + ": no sequences");
        }
        std::sort(records.begin(), records.end(),
                  [](const SequenceRecord& a, const SequenceRecord& b) { return a.id < b.id; });
        write_sequences_jsonl(records, out_ / "corpus_sequences.jsonl");
        info = {{"format", "sequences"}, {"documents", records.size()}};
        input_sequences_ = std::move(records);
    } else {
        const auto format = *parse_corpus_format(config_.corpus_path ? config_.corpus_format : "jsonl");
        Corpus corpus = load_corpus(src, format, LoadOptions{config_.threads});
        if (corpus.documents.empty()) {
            throw DataError(src.string() + ": no documents with non-empty segments");
        }
        write_corpus_jsonl(corpus, out_ / "corpus.jsonl");
        info = {{"format", std::string(to_string(format))},
                {"documents", corpus.documents.size()},
                {"segments", corpus.segment_count()},
                {"dropped_empty_segments", corpus.meta.dropped_empty_segments},
                {"dropped_empty_documents", corpus.meta.dropped_empty_documents},
                {"warnings", corpus.meta.warnings}};
        corpus_ = std::move(corpus);
    }
    write_json(out_ / "ingest.json", info);
}

const Corpus& Pipeline::ingested_corpus()
{
    if (!corpus_) {
        const fs::path path = out_ / "corpus.jsonl";
        require(path, "ingest");
        corpus_ = load_corpus(path, CorpusFormat::jsonl, LoadOptions{config_.threads});
    }
    return *corpus_;
}

void Pipeline::segment()
{
    if (sequence_input()) {
        return; // block sequences are given; the segment-count filter runs in `sequences`
    }
    Corpus corpus = ingested_corpus();
    const auto& seg = config_.segmentation;
    SegmentationMode mode = seg.mode;
    if (mode == SegmentationMode::automatic) {
        const bool timed = !corpus.documents.empty() && !corpus.documents.front().segments.empty()
                           && corpus.documents.front().segments.front().time_start.has_value();
        mode = config_.corpus_format == "subtitle_jsonl" && timed ? SegmentationMode::bayesian_blocks
                                                                  : SegmentationMode::none;
    }
    json per_doc = json::array();
    if (mode == SegmentationMode::markers) {
        const MarkerRule rule{seg.marker_pattern, seg.min_tokens};
        for (auto& doc : corpus.documents) {
            std::string text;
            for (const auto& s : doc.segments) {
                if (!s.raw_text) {
                    throw DataError("document '" + doc.id + "' has no raw text to split at markers");
                }
                if (!text.empty()) {
                    text += '\n';
                }
                text += *s.raw_text;
            }
            doc.segments = segment_by_markers(text, rule);
            per_doc.push_back({{"id", doc.id}, {"segments", doc.segments.size()}});
        }
    } else if (mode == SegmentationMode::bayesian_blocks) {
        BayesianBlocksOptions opts;
        opts.p0 = seg.p0;
        opts.ncp_prior = seg.ncp_prior;
        for (auto& doc : corpus.documents) {
            std::vector<Segment> cues = doc.segments;
            std::stable_sort(cues.begin(), cues.end(), [](const Segment& a, const Segment& b) {
                return a.time_start.value_or(0.0) < b.time_start.value_or(0.0);
            });
            std::vector<double> times;
            for (const auto& c : cues) {
                if (!c.time_start) {
                    throw DataError("document '" + doc.id + "': cue " + std::to_string(c.index)
                                    + " has no time_start");
                }
                times.push_back(*c.time_start);
            }
            const ChangePointResult cp = bayesian_blocks(times, opts);
            doc.segments = regroup_cues(cues, cp);
            per_doc.push_back({{"id", doc.id},
                               {"cues", cues.size()},
                               {"blocks", doc.segments.size()},
                               {"ncp_prior", cp.ncp_prior},
                               {"objective", cp.objective}});
        }
    }

    json info = {{"mode", std::string(to_string(mode))}, {"documents_in", corpus.documents.size()}};
    if (!per_doc.empty()) {
        info["documents"] = std::move(per_doc);
    }
    if (seg.iqr) {
        corpus = iqr_filter(corpus, seg.iqr_multiplier);
        const auto& q = corpus.meta.iqr;
        info["iqr"] = {{"multiplier", q.multiplier}, {"q1", q.q1},          {"q3", q.q3},
                       {"lower_fence", q.lower_fence}, {"upper_fence", q.upper_fence},
                       {"dropped", q.dropped},       {"empty_result", q.empty_result}};
        if (corpus.documents.empty()) {
            throw DataError("segment-count filter removed every document");
        }
    }
    info["documents_out"] = corpus.documents.size();
    info["segments_out"] = corpus.segment_count();
    write_corpus_jsonl(corpus, out_ / "segmented.jsonl");
    write_json(out_ / "segmentation.json", info);
    segmented_ = std::move(corpus);
}

const Corpus& Pipeline::segmented_corpus()
{
    if (!segmented_) {
        const fs::path path = out_ / "segmented.jsonl";
        require(path, "segment");
        segmented_ = load_corpus(path, CorpusFormat::jsonl, LoadOptions{config_.threads});
    }
    return *segmented_;
}

void Pipeline::featurize()
{
    if (sequence_input()) {
        return;
    }
    Corpus corpus = segmented_corpus();
    const Lexicons lex = make_lexicons(config_);
    apply_lexicon(corpus, lex);
    FeatureMatrix m = assemble_matrix(corpus, lex, config_.weights, config_.threads);
    write_feature_matrix(m, out_ / "features.csv", out_ / "features_meta.json");
    features_ = std::move(m);
}

const FeatureMatrix& Pipeline::feature_matrix()
{
    if (!features_) {
        require(out_ / "features.csv", "featurize");
        features_ = read_feature_matrix(out_ / "features.csv", out_ / "features_meta.json");
    }
    return *features_;
}

void Pipeline::cluster()
{
    if (sequence_input()) {
        return;
    }
    KMeansOptions opts;
    opts.k = config_.cluster.k;
    opts.n_init = config_.cluster.n_init;
    opts.max_iter = config_.cluster.max_iter;
    opts.tol = config_.cluster.tol;
    opts.seed = seeds_.cluster;
    opts.threads = config_.threads;
    const FeatureMatrix& m = feature_matrix();
    if (m.rows < static_cast<std::size_t>(opts.k)) {
        throw DataError("k-means needs at least k = " + std::to_string(opts.k) + " segments, got "
                        + std::to_string(m.rows));
    }
    KMeansModel model = kmeans_fit(m, opts);
    write_kmeans_model(model, out_ / "model.json");
    model_ = std::move(model);
}

const KMeansModel& Pipeline::kmeans_model()
{
    if (!model_) {
        require(out_ / "model.json", "cluster");
        model_ = read_kmeans_model(out_ / "model.json");
    }
    return *model_;
}

void Pipeline::sequences()
{
    std::vector<SequenceRecord> records;
    json info;
    if (sequence_input()) {
        if (!input_sequences_) {
            require(out_ / "corpus_sequences.jsonl", "ingest");
            input_sequences_ = read_sequences_jsonl(out_ / "corpus_sequences.jsonl");
        }
        records = *input_sequences_;
        if (config_.segmentation.iqr) {
            std::vector<double> counts;
            for (const auto& r : records) {
                counts.push_back(static_cast<double>(r.labels.size()));
            }
            const IqrFilterInfo q = tukey_fences(counts, config_.segmentation.iqr_multiplier);
            std::erase_if(records, [&](const SequenceRecord& r) {
                const auto n = static_cast<double>(r.labels.size());
                return n < q.lower_fence || n > q.upper_fence;
            });
            info["iqr"] = {{"q1", q.q1},
                           {"q3", q.q3},
                           {"lower_fence", q.lower_fence},
                           {"upper_fence", q.upper_fence},
                           {"dropped", counts.size() - records.size()}};
        }
    } else {
        const Corpus& corpus = segmented_corpus();
        const std::vector<BlockSequence> blocks =
            assign_blocks(corpus, feature_matrix(), kmeans_model(), config_.threads);
        records.reserve(blocks.size());
        for (std::size_t d = 0; d < blocks.size(); ++d) {
            const Document& doc = corpus.documents[d];
            SequenceRecord r;
            r.id = doc.id;
            r.domain = doc.domain;
            r.genre_tags = doc.genre_tags;
            r.eval_score = doc.eval_score;
            r.labels = blocks[d].labels;
            records.push_back(std::move(r));
        }
    }
    std::erase_if(records, [&](const SequenceRecord& r) { return !slice_keeps(config_.slice, r.domain, r.genre_tags); });
    if (records.size() < static_cast<std::size_t>(config_.grouping.n_bins)) {
        throw DataError(std::to_string(records.size()) + " document(s) left for "
                        + std::to_string(config_.grouping.n_bins) + " evaluation groups"
                        + (config_.slice ? " in slice " + config_.slice->first + "=" + config_.slice->second : ""));
    }
    std::vector<double> scores;
    std::vector<std::string> ids;
    for (const auto& r : records) {
        scores.push_back(r.eval_score);
        ids.push_back(r.id);
    }
    const std::vector<int> groups = rank_groups(scores, ids, config_.grouping.n_bins);
    std::vector<std::size_t> group_sizes(static_cast<std::size_t>(config_.grouping.n_bins), 0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].group = groups[i];
        ++group_sizes[static_cast<std::size_t>(groups[i])];
    }
    info["documents"] = records.size();
    info["group_sizes"] = group_sizes;
    if (config_.slice) {
        info["slice"] = config_.slice->first + "=" + config_.slice->second;
    }
    write_sequences_jsonl(records, stage_dir() / "sequences.jsonl");
    write_json(stage_dir() / "sequences.json", info);
    sequences_ = std::move(records);
}

const std::vector<SequenceRecord>& Pipeline::grouped_sequences()
{
    if (!sequences_) {
        const fs::path path = stage_dir() / "sequences.jsonl";
        require(path, "sequences");
        auto records = read_sequences_jsonl(path);
        for (const auto& r : records) {
            if (!r.group || *r.group < 0 || *r.group >= config_.grouping.n_bins) {
                throw DataError(path.string() + ": record '" + r.id + "' has no valid group for n_bins = "
                                + std::to_string(config_.grouping.n_bins) + "; rerun the 'sequences' stage");
            }
        }
        sequences_ = std::move(records);
    }
    return *sequences_;
}

void Pipeline::analyze_order()
{
    const auto& records = grouped_sequences();
    std::vector<std::vector<BlockSequence>> groups(static_cast<std::size_t>(config_.grouping.n_bins));
    for (const auto& r : records) {
        groups[static_cast<std::size_t>(*r.group)].push_back(BlockSequence::from_labels(r.id, r.labels));
    }
    OrderOptions opts;
    opts.medoids = config_.order.medoids;
    opts.aggregation = *parse_aggregation(config_.order.aggregation);
    opts.normalize = config_.order.normalize;
    opts.use_rle = config_.order.use_rle;
    opts.seed = seeds_.order;
    opts.max_group_size = static_cast<std::size_t>(config_.order.max_group_size);
    opts.threads = config_.threads;
    const GroupOrderAnalysis a = structoscope::analyze_order(groups, opts);

    json medoids = json::array();
    for (const auto& gm : a.medoid_sets) {
        medoids.push_back({{"group", gm.group},
                           {"members", gm.members},
                           {"subsampled", gm.subsampled},
                           {"medoid_ids", gm.medoid_ids},
                           {"medoids", gm.medoids},
                           {"assignment_cost", gm.assignment_cost}});
    }
    const json out = {{"medoids_per_group", opts.medoids},
                      {"aggregation", std::string(to_string(opts.aggregation))},
                      {"normalize", opts.normalize},
                      {"use_rle", opts.use_rle},
                      {"cohesion", vector_json(a.cohesion)},
                      {"matrix", matrix_json(a.matrix)},
                      {"groups", std::move(medoids)}};
    detail::write_square_csv(stage_dir() / "order_matrix.csv", group_labels(a.matrix.n), a.matrix.values);
    write_json(stage_dir() / "order_analysis.json", out);
}

void Pipeline::analyze_position()
{
    const auto& records = grouped_sequences();
    const auto n_bins = static_cast<std::size_t>(config_.grouping.n_bins);
    std::vector<std::vector<TransitionEvent>> groups(n_bins);
    for (const auto& r : records) {
        auto events = extract_transitions(BlockSequence::from_labels(r.id, r.labels));
        auto& dst = groups[static_cast<std::size_t>(*r.group)];
        dst.insert(dst.end(), std::make_move_iterator(events.begin()), std::make_move_iterator(events.end()));
    }
    PositionOptions opts;
    if (config_.position.from && config_.position.to) {
        opts.filter = TransitionFilter{*config_.position.from, *config_.position.to};
    }
    opts.grid_size = static_cast<std::size_t>(config_.position.grid);
    opts.bootstrap_reps = config_.position.bootstrap;
    opts.seed = seeds_.position;
    opts.threads = config_.threads;
    const GroupPositionAnalysis a = structoscope::analyze_position(groups, opts);

    const fs::path dir = stage_dir();
    if (fs::exists(dir)) {
        for (const auto& entry : fs::directory_iterator(dir)) {
            const auto name = entry.path().filename().string();
            if (name.starts_with("kde_group_") || name.starts_with("hist_group_")) {
                fs::remove(entry.path());
            }
        }
    }
    const auto bins = static_cast<std::size_t>(config_.position.histogram_bins);
    json per_group = json::array();
    for (std::size_t g = 0; g < n_bins; ++g) {
        json entry = {{"group", g}, {"events", a.samples[g].size()}, {"present", static_cast<bool>(a.present[g])}};
        if (a.present[g]) {
            const KdeCurve& k = a.kde[g];
            std::string csv = "grid,density\n";
            for (std::size_t i = 0; i < k.grid.size(); ++i) {
                csv += detail::format_double(k.grid[i]) + "," + detail::format_double(k.density[i]) + "\n";
            }
            detail::write_text_file(dir / ("kde_group_" + std::to_string(g) + ".csv"), csv);

            std::vector<std::size_t> counts(bins, 0);
            for (double p : a.samples[g]) {
                const auto idx = std::min(bins - 1, static_cast<std::size_t>(std::max(0.0, std::ceil(p * static_cast<double>(bins)) - 1.0)));
                ++counts[idx];
            }
            std::string hist = "bin_start,bin_end,count,density\n";
            const double width = 1.0 / static_cast<double>(bins);
            for (std::size_t b = 0; b < bins; ++b) {
                const double density = static_cast<double>(counts[b]) / (static_cast<double>(a.samples[g].size()) * width);
                hist += detail::format_double(static_cast<double>(b) * width) + ","
                        + detail::format_double(static_cast<double>(b + 1) * width) + "," + std::to_string(counts[b])
                        + "," + detail::format_double(density) + "\n";
            }
            detail::write_text_file(dir / ("hist_group_" + std::to_string(g) + ".csv"), hist);
            entry["bandwidth"] = k.bandwidth;
            entry["degenerate"] = k.degenerate;
        }
        per_group.push_back(std::move(entry));
    }
    const json out = {{"filter", a.filter ? json({{"from", a.filter->first}, {"to", a.filter->second}}) : json()},
                      {"grid", opts.grid_size},
                      {"bootstrap", opts.bootstrap_reps},
                      {"cohesion", vector_json(a.cohesion)},
                      {"matrix", matrix_json(a.matrix)},
                      {"groups", std::move(per_group)}};
    detail::write_square_csv(dir / "position_matrix.csv", group_labels(n_bins), a.matrix.values);
    write_json(dir / "position_analysis.json", out);
}

void Pipeline::classify()
{
    const fs::path dir = stage_dir();
    const fs::path order_path = dir / "order_analysis.json";
    const fs::path position_path = dir / "position_analysis.json";
    require(order_path, "analyze-order");
    require(position_path, "analyze-position");
    const GroupBlocks blocks = blocks_for(config_);

    auto classify_file = [&](const fs::path& path) -> json {
        const json a = read_json(path);
        if (!a.contains("matrix") || !a.contains("cohesion")) {
            throw DataError(path.string() + ": missing 'matrix' or 'cohesion'");
        }
        const DistanceMatrix m = matrix_from_json(a["matrix"], path);
        const std::vector<double> cohesion = vector_from_json(a["cohesion"]);
        try {
            return regime_json(classify_regime(m, cohesion, config_.thresholds, blocks));
        } catch (const DataError& e) {
            // Too few transition events for the blocks: no verdict, keep going.
            return {{"verdict", nullptr}, {"reason", e.what()}};
        }
    };
    const json order = classify_file(order_path);
    const json position = classify_file(position_path);
    const json out = {{"verdict", order["verdict"]},
                      {"order", order},
                      {"position", position},
                      {"thresholds",
                       {{"theta_low", config_.thresholds.theta_low},
                        {"theta_high", config_.thresholds.theta_high},
                        {"gamma", config_.thresholds.gamma}}},
                      {"blocks", {{"high", blocks.high}, {"low", blocks.low}}},
                      {"config_hash", config_hash(config_)}};
    write_json(dir / "regime.json", out);
}

void Pipeline::report()
{
    const fs::path dir = stage_dir();
    require(dir / "regime.json", "classify");
    const json regime = read_json(dir / "regime.json");
    const json order = read_json(dir / "order_analysis.json");
    const json position = read_json(dir / "position_analysis.json");
    const json seqs = fs::exists(dir / "sequences.json") ? read_json(dir / "sequences.json") : json::object();

    std::ostringstream md;
    md << "# Structural convergence report\n\n";
    md << "- config hash: `" << regime.value("config_hash", "") << "`\n";
    if (config_.slice) {
        md << "- slice: " << config_.slice->first << " = " << config_.slice->second << "\n";
    }
    if (seqs.contains("documents")) {
        md << "- documents: " << seqs["documents"].get<std::size_t>() << "\n";
    }
    if (seqs.contains("group_sizes")) {
        md << "- group sizes:";
        for (const auto& s : seqs["group_sizes"]) {
            md << " " << s.get<std::size_t>();
        }
        md << "\n";
    }
    const auto& th = regime["thresholds"];
    md << "- thresholds: theta_low " << fmt(th["theta_low"].get<double>()) << ", theta_high "
       << fmt(th["theta_high"].get<double>()) << ", gamma " << fmt(th["gamma"].get<double>()) << "\n\n";

    md << "## Verdicts\n\n";
    md << "| dimension | verdict | c_high_norm | c_low_norm | cross_ratio |\n|---|---|---|---|---|\n";
    for (const char* dim : {"order", "position"}) {
        const json& r = regime[dim];
        const std::string verdict = r["verdict"].is_string() ? r["verdict"].get<std::string>() : "none";
        md << "| " << dim << " | " << verdict << " | ";
        if (r.contains("diagnostics")) {
            const auto& d = r["diagnostics"];
            md << fmt_json(d["c_high_norm"]) << " | " << fmt_json(d["c_low_norm"]) << " | "
               << fmt_json(d["cross_ratio"]) << " |\n";
        } else {
            md << "NA | NA | NA |\n";
        }
    }

    md << "\n## Transition order\n\nCohesion (mean edit distance to the nearest medoid):";
    for (const auto& c : order["cohesion"]) {
        md << " " << fmt_json(c);
    }
    md << "\n\nMedoids:\n\n";
    for (const auto& g : order["groups"]) {
        md << "- group " << g["group"].get<int>() << " (" << g["members"].get<std::size_t>() << " docs):";
        for (const auto& m : g["medoids"]) {
            md << " [";
            bool first = true;
            for (const auto& l : m) {
                md << (first ? "" : " ") << l.get<int>();
                first = false;
            }
            md << "]";
        }
        md << "\n";
    }
    md << "\nMedoid distance matrix:\n\n";
    markdown_matrix(md, order["matrix"]);

    md << "\n## Transition position\n\n";
    if (position["filter"].is_object()) {
        md << "Transition " << position["filter"]["from"].get<int>() << " -> " << position["filter"]["to"].get<int>()
           << " only.\n\n";
    }
    md << "Events per group:";
    for (const auto& g : position["groups"]) {
        md << " " << g["events"].get<std::size_t>();
    }
    md << "\n\nCohesion (mean split-half W1):";
    for (const auto& c : position["cohesion"]) {
        md << " " << fmt_json(c);
    }
    md << "\n\nW1 distance matrix:\n\n";
    markdown_matrix(md, position["matrix"]);
    detail::write_text_file(dir / "report.md", md.str());
}

void Pipeline::synth()
{
    RegimeSpec spec = config_.synth.spec;
    spec.seed = seeds_.synth;
    const auto records = generate(spec);
    const fs::path dir = out_ / "synth";
    std::error_code ec;
    fs::remove(dir / "corpus.jsonl", ec);
    fs::remove(dir / "sequences.jsonl", ec);
    if (config_.synth.mode == "tokens") {
        const Corpus corpus = render_tokens(records, spec, make_lexicons(config_));
        write_corpus_jsonl(corpus, dir / "corpus.jsonl");
    } else {
        write_sequences_jsonl(records, dir / "sequences.jsonl");
    }
    std::vector<double> planted;
    json truth = {{"regime", std::string(to_string(spec.regime))},
                  {"mode", config_.synth.mode},
                  {"seed", spec.seed},
                  {"documents", records.size()},
                  {"intended_groups", json::array()}};
    for (std::size_t i = 0; i < records.size(); ++i) {
        truth["intended_groups"].push_back(intended_group(static_cast<int>(i), spec.n_docs));
    }
    if (spec.planted) {
        truth["planted"] = {{"from", spec.planted->first}, {"to", spec.planted->second}};
    }
    write_json(dir / "truth.json", truth);
}

void Pipeline::write_manifest() const
{
    json artifacts = json::object();
    std::vector<fs::path> files;
    if (fs::exists(out_)) {
        for (const auto& entry : fs::recursive_directory_iterator(out_)) {
            const auto name = entry.path().filename().string();
            if (entry.is_regular_file() && name != "manifest.json" && name != kLockName) {
                files.push_back(entry.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        artifacts[fs::relative(f, out_).generic_string()] = detail::sha256_file(f);
    }
    json inputs = json::object();
    if (config_.corpus_path && fs::exists(*config_.corpus_path)) {
        inputs["corpus"] = detail::sha256_file(*config_.corpus_path);
    }
    if (config_.stopwords && fs::exists(*config_.stopwords)) {
        inputs["stopwords"] = detail::sha256_file(*config_.stopwords);
    }
    if (config_.affect && fs::exists(*config_.affect)) {
        inputs["affect"] = detail::sha256_file(*config_.affect);
    }
    const json manifest = {
        {"tool", "structoscope"},
        {"version", kVersion},
        {"config_hash", config_hash(config_)},
        {"config", json::parse(canonical_config(config_))},
        {"seeds",
         {{"run", seeds_.run},
          {"cluster", seeds_.cluster},
          {"order", seeds_.order},
          {"position", seeds_.position},
          {"synth", seeds_.synth}}},
        {"libraries",
         {{"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." + std::to_string(NLOHMANN_JSON_VERSION_MINOR)
                                + "." + std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"tomlplusplus", detail::toml_library_version()},
          {"openssl", detail::crypto_library_version()},
          {"lexicon", make_lexicons(config_).id()}}},
        {"inputs", inputs},
        {"artifacts", artifacts}};
    write_json(out_ / "manifest.json", manifest);
}

} // namespace structoscope
