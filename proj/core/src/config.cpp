#include "structoscope/config.hpp"

#include "structoscope/corpus.hpp"
#include "structoscope/error.hpp"

#include "io_util.hpp"
#include "rng.hpp"

#include <json.hpp>
#include <toml.hpp>

#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

namespace structoscope {

namespace {

using json = nlohmann::json;

class Section {
public:
    Section(const toml::table* table, std::string name, std::vector<std::string>& problems,
            const std::filesystem::path& base_dir)
        : table_(table), name_(std::move(name)), problems_(problems), base_dir_(base_dir)
    {
    }

    ~Section()
    {
        if (table_ == nullptr) {
            return;
        }
        for (const auto& [key, node] : *table_) {
            const std::string k(key.str());
            if (!used_.contains(k)) {
                problems_.push_back("unknown key '" + qualified(k) + "'");
            }
        }
    }

    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    template <typename T>
    void read(const char* key, T& out)
    {
        const toml::node* node = find(key);
        if (node == nullptr) {
            return;
        }
        if (auto v = convert<T>(*node, key)) {
            out = std::move(*v);
        }
    }

    template <typename T>
    void read(const char* key, std::optional<T>& out)
    {
        const toml::node* node = find(key);
        if (node == nullptr) {
            return;
        }
        if (auto v = convert<T>(*node, key)) {
            out = std::move(*v);
        }
    }

    void read_path(const char* key, std::optional<std::filesystem::path>& out)
    {
        std::optional<std::string> s;
        read(key, s);
        if (s) {
            out = resolve(*s);
        }
    }

    void read_path(const char* key, std::filesystem::path& out)
    {
        std::optional<std::filesystem::path> p;
        read_path(key, p);
        if (p) {
            out = *p;
        }
    }

    void read_beta(const char* key, BetaShape& out)
    {
        std::optional<std::vector<double>> v;
        read(key, v);
        if (!v) {
            return;
        }
        if (v->size() != 2) {
            problems_.push_back("'" + qualified(key) + "' must be [alpha, beta]");
            return;
        }
        out = BetaShape{(*v)[0], (*v)[1]};
    }

    std::filesystem::path resolve(const std::string& s) const
    {
        std::filesystem::path p(s);
        return p.is_relative() ? base_dir_ / p : p;
    }

    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

private:
    const toml::node* find(const char* key)
    {
        used_.insert(key);
        if (table_ == nullptr) {
            return nullptr;
        }
        return table_->get(key);
    }

    void mismatch(const char* key, const char* expected)
    {
        problems_.push_back("'" + qualified(key) + "' must be " + expected);
    }

    template <typename T>
    std::optional<T> convert(const toml::node& node, const char* key)
    {
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = node.value_exact<bool>()) {
                return *v;
            }
            mismatch(key, "a boolean");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = node.value_exact<std::string>()) {
                return *v;
            }
            mismatch(key, "a string");
        } else if constexpr (std::is_same_v<T, double>) {
            if (node.is_number()) {
                return node.value<double>();
            }
            mismatch(key, "a number");
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (auto v = node.value_exact<std::int64_t>(); v && *v >= 0) {
                return static_cast<std::uint64_t>(*v);
            }
            mismatch(key, "a nonnegative integer");
        } else if constexpr (std::is_integral_v<T>) {
            if (auto v = node.value_exact<std::int64_t>()) {
                if (*v >= std::numeric_limits<T>::min() && *v <= std::numeric_limits<T>::max()) {
                    return static_cast<T>(*v);
                }
            }
            mismatch(key, "an integer");
        } else if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<double>>) {
            using E = typename T::value_type;
            const auto* arr = node.as_array();
            if (arr != nullptr) {
                T out;
                bool ok = true;
                for (const auto& el : *arr) {
                    if constexpr (std::is_same_v<E, int>) {
                        auto v = el.value_exact<std::int64_t>();
                        ok = ok && v.has_value();
                        if (v) {
                            out.push_back(static_cast<int>(*v));
                        }
                    } else {
                        ok = ok && el.is_number();
                        if (el.is_number()) {
                            out.push_back(*el.value<double>());
                        }
                    }
                }
                if (ok) {
                    return out;
                }
            }
            mismatch(key, std::is_same_v<E, int> ? "an array of integers" : "an array of numbers");
        }
        return std::nullopt;
    }

    const toml::table* table_;
    std::string name_;
    std::vector<std::string>& problems_;
    std::filesystem::path base_dir_;
    std::set<std::string> used_;
};

const toml::table* subtable(const toml::table& root, const char* name, std::vector<std::string>& problems)
{
    const toml::node* node = root.get(name);
    if (node == nullptr) {
        return nullptr;
    }
    if (!node->is_table()) {
        problems.push_back(std::string("'") + name + "' must be a table");
        return nullptr;
    }
    return node->as_table();
}

void throw_problems(const std::string& header, const std::vector<std::string>& problems)
{
    if (problems.empty()) {
        return;
    }
    std::string msg = header;
    for (const auto& p : problems) {
        msg += "\n  - " + p;
    }
    throw ValidationError(msg);
}

} // namespace

std::optional<SegmentationMode> parse_segmentation_mode(std::string_view name)
{
    if (name == "auto") return SegmentationMode::automatic;
    if (name == "none") return SegmentationMode::none;
    if (name == "markers") return SegmentationMode::markers;
    if (name == "bayesian_blocks") return SegmentationMode::bayesian_blocks;
    return std::nullopt;
}

std::string_view to_string(SegmentationMode mode)
{
    switch (mode) {
    case SegmentationMode::automatic: return "auto";
    case SegmentationMode::none: return "none";
    case SegmentationMode::markers: return "markers";
    case SegmentationMode::bayesian_blocks: return "bayesian_blocks";
    }
    return "?";
}

RunConfig parse_config(std::string_view toml_text, const std::filesystem::path& base_dir)
{
    toml::table root;
    try {
        root = toml::parse(toml_text);
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config: " << e.description() << " (line " << e.source().begin.line << ", column "
            << e.source().begin.column << ")";
        throw ValidationError(msg.str());
    }

    static const std::set<std::string> known = {"run", "corpus", "lexicon", "segmentation", "features",
                                                "cluster", "grouping", "order", "position", "classify",
                                                "synth"};
    std::vector<std::string> problems;
    for (const auto& [key, node] : root) {
        if (!known.contains(std::string(key.str()))) {
            problems.push_back("unknown section '" + std::string(key.str()) + "'");
        }
    }

    RunConfig c;
    {
        Section s(subtable(root, "run", problems), "run", problems, base_dir);
        s.read("seed", c.seed);
        s.read("threads", c.threads);
        s.read_path("output", c.output);
        std::optional<std::string> slice;
        s.read("slice", slice);
        if (slice) {
            const auto eq = slice->find('=');
            if (eq == std::string::npos) {
                problems.push_back("'run.slice' must look like key=value");
            } else {
                c.slice = std::make_pair(slice->substr(0, eq), slice->substr(eq + 1));
            }
        }
    }
    {
        Section s(subtable(root, "corpus", problems), "corpus", problems, base_dir);
        s.read_path("path", c.corpus_path);
        s.read("format", c.corpus_format);
    }
    {
        Section s(subtable(root, "lexicon", problems), "lexicon", problems, base_dir);
        s.read_path("stopwords", c.stopwords);
        s.read_path("affect", c.affect);
    }
    {
        Section s(subtable(root, "segmentation", problems), "segmentation", problems, base_dir);
        std::optional<std::string> mode;
        s.read("mode", mode);
        if (mode) {
            if (auto m = parse_segmentation_mode(*mode)) {
                c.segmentation.mode = *m;
            } else {
                problems.push_back("'segmentation.mode' must be auto, none, markers or bayesian_blocks");
            }
        }
        s.read("marker", c.segmentation.marker_pattern);
        s.read("min_tokens", c.segmentation.min_tokens);
        s.read("p0", c.segmentation.p0);
        s.read("ncp_prior", c.segmentation.ncp_prior);
        s.read("iqr", c.segmentation.iqr);
        s.read("iqr_multiplier", c.segmentation.iqr_multiplier);
    }
    {
        Section s(subtable(root, "features", problems), "features", problems, base_dir);
        s.read("pos_weight", c.weights.pos);
        s.read("deprel_weight", c.weights.deprel);
        s.read("stop_weight", c.weights.stop);
        s.read("affect_weight", c.weights.affect);
    }
    {
        Section s(subtable(root, "cluster", problems), "cluster", problems, base_dir);
        s.read("k", c.cluster.k);
        s.read("n_init", c.cluster.n_init);
        s.read("max_iter", c.cluster.max_iter);
        s.read("tol", c.cluster.tol);
        s.read("seed", c.cluster.seed);
    }
    {
        Section s(subtable(root, "grouping", problems), "grouping", problems, base_dir);
        s.read("n_bins", c.grouping.n_bins);
        s.read("high", c.grouping.high);
        s.read("low", c.grouping.low);
    }
    {
        Section s(subtable(root, "order", problems), "order", problems, base_dir);
        s.read("medoids", c.order.medoids);
        s.read("aggregation", c.order.aggregation);
        s.read("normalize", c.order.normalize);
        s.read("use_rle", c.order.use_rle);
        s.read("max_group_size", c.order.max_group_size);
        s.read("seed", c.order.seed);
    }
    {
        Section s(subtable(root, "position", problems), "position", problems, base_dir);
        s.read("from", c.position.from);
        s.read("to", c.position.to);
        s.read("grid", c.position.grid);
        s.read("bootstrap", c.position.bootstrap);
        s.read("histogram_bins", c.position.histogram_bins);
        s.read("seed", c.position.seed);
    }
    {
        Section s(subtable(root, "classify", problems), "classify", problems, base_dir);
        s.read("theta_low", c.thresholds.theta_low);
        s.read("theta_high", c.thresholds.theta_high);
        s.read("gamma", c.thresholds.gamma);
    }
    {
        Section s(subtable(root, "synth", problems), "synth", problems, base_dir);
        RegimeSpec& r = c.synth.spec;
        std::optional<std::string> regime;
        s.read("regime", regime);
        if (regime) {
            if (auto v = parse_regime(*regime)) {
                r.regime = *v;
            } else {
                problems.push_back("'synth.regime' must be ordered, akp, reverse_akp or noisy");
            }
        }
        s.read("mode", c.synth.mode);
        s.read("seed", c.synth.seed);
        s.read("n_docs", r.n_docs);
        s.read("seg_min", r.seg_min);
        s.read("seg_max", r.seg_max);
        s.read("alphabet", r.alphabet);
        s.read("template_length", r.template_length);
        s.read("scatter_min", r.scatter_min);
        s.read("scatter_max", r.scatter_max);
        s.read("noise_high", r.noise_high);
        s.read("noise_low", r.noise_low);
        s.read_beta("position_high", r.position_high);
        s.read_beta("position_low", r.position_low);
        std::optional<std::vector<int>> planted;
        s.read("planted", planted);
        if (planted) {
            if (planted->size() == 2) {
                r.planted = std::make_pair((*planted)[0], (*planted)[1]);
            } else {
                problems.push_back("'synth.planted' must be [from, to]");
            }
        }
        s.read("tokens_min", r.tokens_min);
        s.read("tokens_max", r.tokens_max);
        s.read("signature_share", r.signature_share);
    }
    throw_problems("invalid config:", problems);
    return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
    if (!std::filesystem::is_regular_file(path)) {
        throw ValidationError("config file not found: " + path.string());
    }
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    return parse_config(detail::read_text_file(path), base);
}

void apply_seed_env(RunConfig& config)
{
    const char* raw = std::getenv("STRUCTOSCOPE_SEED");
    if (raw == nullptr || *raw == '\0') {
        return;
    }
    const std::string text(raw);
    std::uint64_t value = 0;
    try {
        std::size_t used = 0;
        value = std::stoull(text, &used, 10);
        if (used != text.size() || text.front() == '-') {
            throw std::invalid_argument(text);
        }
    } catch (const std::exception&) {
        throw ValidationError("STRUCTOSCOPE_SEED must be a nonnegative integer, got '" + text + "'");
    }
    config.seed = value;
    config.cluster.seed.reset();
    config.order.seed.reset();
    config.position.seed.reset();
    config.synth.seed.reset();
}

Seeds resolve_seeds(const RunConfig& config)
{
    if (!config.seed) {
        throw ValidationError("a run seed is required ([run] seed, --seed or STRUCTOSCOPE_SEED)");
    }
    Seeds s;
    s.run = *config.seed;
    s.cluster = config.cluster.seed.value_or(detail::mix_seed(s.run, 1));
    s.order = config.order.seed.value_or(detail::mix_seed(s.run, 2));
    s.position = config.position.seed.value_or(detail::mix_seed(s.run, 3));
    s.synth = config.synth.seed.value_or(detail::mix_seed(s.run, 4));
    return s;
}

void validate_config(const RunConfig& c, std::string_view command)
{
    std::vector<std::string> p;
    auto check = [&](bool ok, const std::string& what) {
        if (!ok) {
            p.push_back(what);
        }
    };
    check(c.seed.has_value(), "a run seed is required ([run] seed, --seed or STRUCTOSCOPE_SEED)");
    check(c.threads >= 1, "run.threads must be >= 1");
    check(!c.output.empty(), "run.output must not be empty");

    const bool sequences_input = c.corpus_format == "sequences";
    check(sequences_input || parse_corpus_format(c.corpus_format).has_value(),
          "corpus.format must be jsonl, conllu_dir, subtitle_jsonl or sequences");
    const bool reads_corpus = command == "ingest" || command == "all";
    if (reads_corpus && c.corpus_path) {
        check(std::filesystem::exists(*c.corpus_path), "corpus.path does not exist: " + c.corpus_path->string());
    }
    if (c.stopwords) {
        check(std::filesystem::is_regular_file(*c.stopwords),
              "lexicon.stopwords does not exist: " + c.stopwords->string());
    }
    if (c.affect) {
        check(std::filesystem::is_regular_file(*c.affect), "lexicon.affect does not exist: " + c.affect->string());
        check(c.stopwords.has_value(), "lexicon.affect needs lexicon.stopwords");
    }

    const auto& seg = c.segmentation;
    check(seg.min_tokens >= 1, "segmentation.min_tokens must be >= 1");
    check(seg.p0 > 0.0 && seg.p0 < 1.0, "segmentation.p0 must be in (0, 1)");
    check(seg.iqr_multiplier >= 0.0, "segmentation.iqr_multiplier must be >= 0");
    if (seg.mode == SegmentationMode::markers) {
        check(!seg.marker_pattern.empty(), "segmentation.marker is required in markers mode");
    }
    if (seg.mode == SegmentationMode::bayesian_blocks) {
        check(c.corpus_format == "subtitle_jsonl", "bayesian_blocks segmentation needs corpus.format = subtitle_jsonl");
    }

    const FamilyWeights& w = c.weights;
    check(w.pos >= 0 && w.deprel >= 0 && w.stop >= 0 && w.affect >= 0, "feature weights must be >= 0");
    check(w.pos + w.deprel + w.stop + w.affect > 0, "at least one feature weight must be positive");

    check(c.cluster.k >= 2, "cluster.k must be >= 2");
    check(c.cluster.n_init >= 1, "cluster.n_init must be >= 1");
    check(c.cluster.max_iter >= 1, "cluster.max_iter must be >= 1");
    check(c.cluster.tol >= 0.0, "cluster.tol must be >= 0");

    const int n_bins = c.grouping.n_bins;
    check(n_bins >= 2, "grouping.n_bins must be >= 2");
    auto check_block = [&](const std::optional<std::vector<int>>& block, const char* name) {
        if (!block) {
            check(n_bins >= 6, std::string("grouping.") + name + " is required when n_bins < 6");
            return;
        }
        check(!block->empty(), std::string("grouping.") + name + " must not be empty");
        for (int g : *block) {
            check(g >= 0 && g < n_bins, std::string("grouping.") + name + " entry " + std::to_string(g)
                                            + " is outside 0.." + std::to_string(n_bins - 1));
        }
    };
    check_block(c.grouping.high, "high");
    check_block(c.grouping.low, "low");

    check(c.order.medoids >= 1, "order.medoids must be >= 1");
    check(parse_aggregation(c.order.aggregation).has_value(), "order.aggregation must be mean or min");
    check(c.order.max_group_size >= 0, "order.max_group_size must be >= 0 (0 = no limit)");
    check(c.position.from.has_value() == c.position.to.has_value(), "position.from and position.to go together");
    if (c.position.from && c.position.to) {
        check(*c.position.from >= 0 && *c.position.to >= 0 && *c.position.from != *c.position.to,
              "position.from/to must be distinct nonnegative labels");
    }
    check(c.position.grid >= 2, "position.grid must be >= 2");
    check(c.position.bootstrap >= 1, "position.bootstrap must be >= 1");
    check(c.position.histogram_bins >= 1, "position.histogram_bins must be >= 1");
    check(c.thresholds.theta_low > 0.0 && c.thresholds.theta_low <= c.thresholds.theta_high,
          "classify thresholds need 0 < theta_low <= theta_high");
    check(c.thresholds.gamma > 0.0, "classify.gamma must be > 0");
    check(c.synth.mode == "tokens" || c.synth.mode == "sequences", "synth.mode must be tokens or sequences");
    if (command == "synth") {
        try {
            c.synth.spec.validate();
        } catch (const ValidationError& e) {
            p.push_back(e.what());
        }
    }
    if (c.slice) {
        check(c.slice->first == "genre" || c.slice->first == "domain", "slice key must be genre or domain");
        check(!c.slice->second.empty(), "slice value must not be empty");
    }
    throw_problems("invalid config:", p);
}

std::string canonical_config(const RunConfig& c)
{
    const Seeds seeds = resolve_seeds(c);
    json j;
    j["corpus"]["format"] = c.corpus_format;
    j["segmentation"] = {
        {"mode", std::string(to_string(c.segmentation.mode))},
        {"marker", c.segmentation.marker_pattern},
        {"min_tokens", c.segmentation.min_tokens},
        {"p0", c.segmentation.p0},
        {"ncp_prior", c.segmentation.ncp_prior ? json(*c.segmentation.ncp_prior) : json()},
        {"iqr", c.segmentation.iqr},
        {"iqr_multiplier", c.segmentation.iqr_multiplier},
    };
    j["features"] = {{"pos_weight", c.weights.pos},
                     {"deprel_weight", c.weights.deprel},
                     {"stop_weight", c.weights.stop},
                     {"affect_weight", c.weights.affect}};
    j["cluster"] = {{"k", c.cluster.k},
                    {"n_init", c.cluster.n_init},
                    {"max_iter", c.cluster.max_iter},
                    {"tol", c.cluster.tol},
                    {"seed", seeds.cluster}};
    const GroupBlocks blocks = c.grouping.high && c.grouping.low ? GroupBlocks{*c.grouping.high, *c.grouping.low}
                               : c.grouping.n_bins >= 6           ? GroupBlocks::for_bins(c.grouping.n_bins)
                                                                  : GroupBlocks{};
    j["grouping"] = {{"n_bins", c.grouping.n_bins},
                     {"high", c.grouping.high.value_or(blocks.high)},
                     {"low", c.grouping.low.value_or(blocks.low)}};
    j["order"] = {{"medoids", c.order.medoids},
                  {"aggregation", c.order.aggregation},
                  {"normalize", c.order.normalize},
                  {"use_rle", c.order.use_rle},
                  {"max_group_size", c.order.max_group_size},
                  {"seed", seeds.order}};
    j["position"] = {{"from", c.position.from ? json(*c.position.from) : json()},
                     {"to", c.position.to ? json(*c.position.to) : json()},
                     {"grid", c.position.grid},
                     {"bootstrap", c.position.bootstrap},
                     {"histogram_bins", c.position.histogram_bins},
                     {"seed", seeds.position}};
    j["classify"] = {{"theta_low", c.thresholds.theta_low},
                     {"theta_high", c.thresholds.theta_high},
                     {"gamma", c.thresholds.gamma}};
    const RegimeSpec& r = c.synth.spec;
    j["synth"] = {{"regime", std::string(to_string(r.regime))},
                  {"mode", c.synth.mode},
                  {"seed", seeds.synth},
                  {"n_docs", r.n_docs},
                  {"seg_min", r.seg_min},
                  {"seg_max", r.seg_max},
                  {"alphabet", r.alphabet},
                  {"template_length", r.template_length},
                  {"scatter_min", r.scatter_min},
                  {"scatter_max", r.scatter_max},
                  {"noise_high", r.noise_high},
                  {"noise_low", r.noise_low},
                  {"position_high", {r.position_high.alpha, r.position_high.beta}},
                  {"position_low", {r.position_low.alpha, r.position_low.beta}},
                  {"planted", r.planted ? json({r.planted->first, r.planted->second}) : json()},
                  {"tokens_min", r.tokens_min},
                  {"tokens_max", r.tokens_max},
                  {"signature_share", r.signature_share}};
    j["run"] = {{"seed", seeds.run},
                {"slice", c.slice ? json(c.slice->first + "=" + c.slice->second) : json()}};
    return j.dump();
}

std::string detail::toml_library_version()
{
    return std::to_string(TOML_LIB_MAJOR) + "." + std::to_string(TOML_LIB_MINOR) + "." + std::to_string(TOML_LIB_PATCH);
}

std::string config_hash(const RunConfig& config)
{
    return detail::sha256_hex(canonical_config(config));
}

} // namespace structoscope
