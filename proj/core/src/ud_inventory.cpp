#include "structoscope/ud_inventory.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace structoscope {

std::optional<std::uint8_t> upos_index(std::string_view tag)
{
    auto it = std::find(kUposNames.begin(), kUposNames.end(), tag);
    if (it == kUposNames.end()) {
        return std::nullopt;
    }
    return static_cast<std::uint8_t>(it - kUposNames.begin());
}

std::optional<std::uint8_t> deprel_index(std::string_view label)
{
    auto base = label.substr(0, label.find(':'));
    std::string lowered(base);
    std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    auto it = std::find(kDeprelNames.begin(), kDeprelNames.end(), lowered);
    if (it == kDeprelNames.end()) {
        return std::nullopt;
    }
    return static_cast<std::uint8_t>(it - kDeprelNames.begin());
}

} // namespace structoscope
