#pragma once

#include <stdexcept>
#include <string>

namespace nestner {

// Base for every error this library throws. The CLI maps subclasses to
// exit codes; everything else surfaces as an internal error.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- numeric kernel ---
struct ShapeError : Error {
    using Error::Error;
};
struct NotScalarError : Error {
    using Error::Error;
};

// --- annotations / codecs ---
struct OverlapError : Error {
    using Error::Error;
};
struct LengthMismatchError : Error {
    using Error::Error;
};
struct SchemeMismatchError : Error {
    using Error::Error;
};

// --- crf ---
struct EmptySequenceError : Error {
    using Error::Error;
};
struct IllegalGoldPathError : Error {
    using Error::Error;
};

// --- ordering ---
struct TooLargeError : Error {
    using Error::Error;
};

// --- training ---
struct MissingGradientError : Error {
    using Error::Error;
};
struct EmptyCorpusError : Error {
    using Error::Error;
};

// --- inference ---
struct SequenceTooLongError : Error {
    using Error::Error;
};

// --- corpus io ---
struct ParseError : Error {
    using Error::Error;
};
struct MissingTextFileError : Error {
    using Error::Error;
};
struct SchemaError : Error {
    using Error::Error;
};
struct TooSmallError : Error {
    using Error::Error;
};
struct VersionMismatchError : Error {
    using Error::Error;
};
struct ShapeMismatchError : Error {
    using Error::Error;
};
struct CorruptPayloadError : Error {
    using Error::Error;
};

}  // namespace nestner
