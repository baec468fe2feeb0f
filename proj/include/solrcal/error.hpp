#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace solrcal {

/// Every failure the library reports carries one of these codes. The CLI maps
/// the category() of a code onto its exit status.
enum class Errc {
    // sparams-core
    ZeroTransmission,
    SingularT,
    SingularCascade,
    GridMismatch,
    InvalidGrid,
    InvalidNetwork,
    InvalidArgument,
    // touchstone-io
    MalformedOptionLine,
    NonMonotonicFrequency,
    WrongValueCount,
    EmptyFile,
    UnsupportedVersion,
    // standards-models
    NonPhysical,
    IllConditioned,
    Unsupported,
    // error-model
    PoleHit,
    SingularCorrection,
    SingularEmbedding,
    DisconnectedTree,
    // cal-solvers
    DegenerateStandards,
    SingularSystem,
    SignAmbiguous,
    LowTransmission,
    AllPairsDegenerate,
    BranchTrackingLost,
    InconsistentSharedPort,
    InconsistentK,
    // config / harness
    ConfigSyntax,
    ConfigMissingKey,
    ConfigBadValue,
    InvalidScenario,
    Io,
};

enum class ErrorCategory { Parse, Solver, Io };

std::string_view errc_name(Errc code);
ErrorCategory errc_category(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& message() const noexcept { return message_; }

    /// Frequency (Hz) at which a per-point failure happened, when known.
    const std::optional<double>& frequency() const noexcept { return frequency_; }
    /// 1-based source line for parser diagnostics.
    const std::optional<int>& line() const noexcept { return line_; }

    Error& at_frequency(double hz);
    Error& at_line(int line);

private:
    Errc code_;
    std::string message_;
    std::optional<double> frequency_;
    std::optional<int> line_;
};

/// Builds an Error whose message is prefixed with the frequency.
Error error_at(Errc code, double hz, const std::string& message);

} // namespace solrcal
