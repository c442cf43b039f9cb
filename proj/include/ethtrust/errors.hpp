#pragma once

#include <stdexcept>
#include <string>

namespace ethtrust {

// Base class for every error this library raises on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// --- dataset / CSV ---
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    ParseError(const std::string& what, std::size_t row, std::size_t col)
        : Error(what + " (row " + std::to_string(row) + ", column " + std::to_string(col) + ")"),
          row(row),
          col(col) {}
    explicit ParseError(const std::string& what) : Error(what), row(0), col(0) {}
    std::size_t row;
    std::size_t col;
};
struct MissingColumn : Error {
    using Error::Error;
};
struct DuplicateAddress : Error {
    using Error::Error;
};

// --- ingestion ---
struct HttpError : Error {
    using Error::Error;
};
struct RateLimited : Error {
    using Error::Error;
};
struct MalformedResponse : Error {
    using Error::Error;
};

// --- features ---
struct MissingLabel : Error {
    using Error::Error;
};

// --- gbdt ---
struct InvalidConfig : Error {
    using Error::Error;
};
struct EmptyDataset : Error {
    using Error::Error;
};
struct SingleClass : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct VersionMismatch : Error {
    using Error::Error;
};
struct CorruptFile : Error {
    using Error::Error;
};

// --- evaluation ---
struct UndefinedMetric : Error {
    using Error::Error;
};
struct TooFewRows : Error {
    using Error::Error;
};

// --- tsne ---
struct PerplexityTooLarge : Error {
    using Error::Error;
};

}  // namespace ethtrust
