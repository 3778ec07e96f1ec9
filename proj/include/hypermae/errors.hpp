#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hypermae {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Data and file errors.
class FormatError : public Error { using Error::Error; };
class UnsupportedDtype : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };
class EmptyCube : public Error { using Error::Error; };
class NoTiles : public Error { using Error::Error; };
class MissingWavelengths : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class GridError : public Error { using Error::Error; };
class WindowError : public Error { using Error::Error; };

class DegenerateChannel : public Error {
public:
    explicit DegenerateChannel(std::size_t channel)
        : Error("channel " + std::to_string(channel) + " is constant across the train split"),
          channel_(channel) {}
    std::size_t channel() const noexcept { return channel_; }

private:
    std::size_t channel_;
};

// Clustering errors.
class InvalidGroupCount : public Error { using Error::Error; };
class UndefinedScore : public Error { using Error::Error; };

// Model and training errors.
class TraceError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };

/// Invalid configuration; `pointer()` is a JSON pointer to the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string pointer, const std::string& what)
        : Error(pointer.empty() ? what : pointer + ": " + what), pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

} // namespace hypermae
