#ifndef STRUCTOSCOPE_ERROR_HPP
#define STRUCTOSCOPE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace structoscope {

/// Caller supplied an invalid argument or configuration. CLI exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data is malformed, missing, or unusable. CLI exit code 3.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace structoscope

#endif
