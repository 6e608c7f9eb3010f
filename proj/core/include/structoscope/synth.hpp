#ifndef STRUCTOSCOPE_SYNTH_HPP
#define STRUCTOSCOPE_SYNTH_HPP

#include "structoscope/convergence.hpp"
#include "structoscope/corpus.hpp"
#include "structoscope/lexicon.hpp"
#include "structoscope/sequence.hpp"

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

namespace structoscope {

struct BetaShape {
    double alpha = 1.0;
    double beta = 1.0;
};

/// Parameters of a synthetic corpus with a planted structural regime.
/// Documents are spread over ten score deciles: deciles 7-9 form the high
/// side, 0-2 the low side, and deciles 3-6 mix the two sides.
struct RegimeSpec {
    Regime regime = Regime::akp;
    int n_docs = 200;
    int seg_min = 20;
    int seg_max = 60;
    int alphabet = 5;
    int template_length = 8;
    int scatter_min = 6; // length range of unstructured sequences
    int scatter_max = 10;
    double noise_high = 0.05;
    double noise_low = 0.05;
    BetaShape position_high{5.0, 2.0};
    BetaShape position_low{2.0, 5.0};
    std::optional<std::pair<int, int>> planted; // from -> to transition
    std::uint64_t seed = 0;

    // token rendering
    int tokens_min = 8;
    int tokens_max = 16;
    double signature_share = 0.85;

    /// Throws ValidationError listing every invalid field.
    void validate() const;
};

std::vector<SequenceRecord> generate(const RegimeSpec& spec);

/// Decile that document i of n is generated for; scores rise with i.
int intended_group(int doc_index, int n_docs);

/// Turns label sequences into token streams: each label has its own
/// signature stopwords, stopword share and affect band, so segment
/// features recover the label.
Corpus render_tokens(const std::vector<SequenceRecord>& records, const RegimeSpec& spec,
                     const Lexicons& lexicons);

} // namespace structoscope

#endif
