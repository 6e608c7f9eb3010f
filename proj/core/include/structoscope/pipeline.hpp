#ifndef STRUCTOSCOPE_PIPELINE_HPP
#define STRUCTOSCOPE_PIPELINE_HPP

#include "structoscope/config.hpp"
#include "structoscope/convergence.hpp"
#include "structoscope/corpus.hpp"
#include "structoscope/features.hpp"
#include "structoscope/kmeans.hpp"
#include "structoscope/sequence.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace structoscope {

/// Stage names accepted by Pipeline::run, in execution order ("all" last).
const std::vector<std::string>& pipeline_commands();

/// Runs pipeline stages against one output directory. Each stage reads its
/// inputs from the artifacts of earlier stages (or from memory when they ran
/// in the same Pipeline) and writes its own artifacts plus manifest.json.
class Pipeline {
public:
    explicit Pipeline(RunConfig config);
    ~Pipeline();

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    /// Validates the config for `command`, takes the output-directory lock
    /// and runs the stage (or every stage for "all").
    void run(std::string_view command);

    const RunConfig& config() const { return config_; }

    /// Directory for grouping-dependent outputs: the output directory, or
    /// `slice-<key>-<value>` below it when slicing.
    std::filesystem::path stage_dir() const;

private:
    void run_stage(std::string_view stage);

    void ingest();
    void segment();
    void featurize();
    void cluster();
    void sequences();
    void analyze_order();
    void analyze_position();
    void classify();
    void report();
    void synth();
    void write_manifest() const;

    bool sequence_input() const;
    std::filesystem::path input_path() const;

    const Corpus& ingested_corpus();
    const Corpus& segmented_corpus();
    const FeatureMatrix& feature_matrix();
    const KMeansModel& kmeans_model();
    const std::vector<SequenceRecord>& grouped_sequences();

    RunConfig config_;
    Seeds seeds_;
    std::filesystem::path out_;

    std::optional<Corpus> corpus_;
    std::optional<std::vector<SequenceRecord>> input_sequences_;
    std::optional<Corpus> segmented_;
    std::optional<FeatureMatrix> features_;
    std::optional<KMeansModel> model_;
    std::optional<std::vector<SequenceRecord>> sequences_;
};

} // namespace structoscope

#endif
