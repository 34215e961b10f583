#pragma once

#include <stdexcept>
#include <string>

namespace surrmeta {

// Exit-code mapping used by the CLI: usage=1, data=2, numeric=3.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct SchemaError : DataError {
    explicit SchemaError(const std::string& msg) : DataError(msg) {}
};

struct ParseError : DataError {
    explicit ParseError(const std::string& msg) : DataError(msg) {}
};

struct IntegrityError : DataError {
    explicit IntegrityError(const std::string& msg) : DataError(msg) {}
};

struct InsufficientDataError : DataError {
    explicit InsufficientDataError(const std::string& msg) : DataError(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace surrmeta
