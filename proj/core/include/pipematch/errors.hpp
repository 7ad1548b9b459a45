#pragma once

#include <stdexcept>
#include <string>

namespace pipematch {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A physical-model parameter lies outside its declared range. Carries the
/// offending field name.
class OutOfRangeParam : public Error {
public:
    OutOfRangeParam(const std::string& field, double value, double lo, double hi)
        : Error("parameter '" + field + "' = " + std::to_string(value) +
                " outside range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]"),
          field_(field) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

/// The requested fundamental is too high for the sample rate to carry the
/// minimum number of harmonics.
class UnrepresentablePitch : public Error {
public:
    using Error::Error;
};

/// A render_tone error re-raised by render_batch with the list index attached.
class BatchRenderError : public Error {
public:
    BatchRenderError(std::size_t index, const std::string& what)
        : Error("item " + std::to_string(index) + ": " + what), index_(index) {}
    std::size_t index() const { return index_; }

private:
    std::size_t index_;
};

class ToneTooShort : public Error {
public:
    using Error::Error;
};

class PitchMismatch : public Error {
public:
    using Error::Error;
};

class SampleRateMismatch : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class NonFiniteLoss : public Error {
public:
    NonFiniteLoss() : Error("non-finite loss") {}
    explicit NonFiniteLoss(int epoch)
        : Error("non-finite loss at epoch " + std::to_string(epoch)), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_ = -1;
};

class DatasetTooSmall : public Error {
public:
    using Error::Error;
};

class EmptyDataset : public Error {
public:
    using Error::Error;
};

class TooFewStops : public Error {
public:
    using Error::Error;
};

class AllCandidatesFailed : public Error {
public:
    using Error::Error;
};

class UnreadableFile : public Error {
public:
    using Error::Error;
};

class UnsupportedEncoding : public Error {
public:
    using Error::Error;
};

/// Malformed config, manifest or model file.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace pipematch
