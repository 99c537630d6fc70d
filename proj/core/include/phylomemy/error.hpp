#pragma once

#include <stdexcept>
#include <string>

namespace phylo {

/// Base error for every failure raised by the reconstruction pipeline.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input (corpus, root list, config file).
class InputError : public Error {
public:
    using Error::Error;
};

/// A configuration value outside its valid domain.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace phylo
