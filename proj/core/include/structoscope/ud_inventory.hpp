#ifndef STRUCTOSCOPE_UD_INVENTORY_HPP
#define STRUCTOSCOPE_UD_INVENTORY_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace structoscope {

// Universal Dependencies v2 closed inventories.

inline constexpr std::size_t kNumUpos = 17;
inline constexpr std::size_t kNumDeprel = 37;

inline constexpr std::array<std::string_view, kNumUpos> kUposNames = {
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

inline constexpr std::array<std::string_view, kNumDeprel> kDeprelNames = {
    "acl", "advcl", "advmod", "amod", "appos", "aux", "case", "cc",
    "ccomp", "clf", "compound", "conj", "cop", "csubj", "dep", "det",
    "discourse", "dislocated", "expl", "fixed", "flat", "goeswith", "iobj", "list",
    "mark", "nmod", "nsubj", "nummod", "obj", "obl", "orphan", "parataxis",
    "punct", "reparandum", "root", "vocative", "xcomp"};

/// Index into kUposNames, or nullopt if the tag is not a UPOS tag.
std::optional<std::uint8_t> upos_index(std::string_view tag);

/// Index into kDeprelNames. Subtypes ("nsubj:pass") map to their universal
/// relation; matching is case-insensitive so "ROOT" is accepted.
std::optional<std::uint8_t> deprel_index(std::string_view label);

} // namespace structoscope

#endif
