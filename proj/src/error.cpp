#include "solrcal/error.hpp"

#include <cstdio>

namespace solrcal {

std::string_view errc_name(Errc code)
{
    switch (code) {
    case Errc::ZeroTransmission: return "ZeroTransmission";
    case Errc::SingularT: return "SingularT";
    case Errc::SingularCascade: return "SingularCascade";
    case Errc::GridMismatch: return "GridMismatch";
    case Errc::InvalidGrid: return "InvalidGrid";
    case Errc::InvalidNetwork: return "InvalidNetwork";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::MalformedOptionLine: return "MalformedOptionLine";
    case Errc::NonMonotonicFrequency: return "NonMonotonicFrequency";
    case Errc::WrongValueCount: return "WrongValueCount";
    case Errc::EmptyFile: return "EmptyFile";
    case Errc::UnsupportedVersion: return "UnsupportedVersion";
    case Errc::NonPhysical: return "NonPhysical";
    case Errc::IllConditioned: return "IllConditioned";
    case Errc::Unsupported: return "Unsupported";
    case Errc::PoleHit: return "PoleHit";
    case Errc::SingularCorrection: return "SingularCorrection";
    case Errc::SingularEmbedding: return "SingularEmbedding";
    case Errc::DisconnectedTree: return "DisconnectedTree";
    case Errc::DegenerateStandards: return "DegenerateStandards";
    case Errc::SingularSystem: return "SingularSystem";
    case Errc::SignAmbiguous: return "SignAmbiguous";
    case Errc::LowTransmission: return "LowTransmission";
    case Errc::AllPairsDegenerate: return "AllPairsDegenerate";
    case Errc::BranchTrackingLost: return "BranchTrackingLost";
    case Errc::InconsistentSharedPort: return "InconsistentSharedPort";
    case Errc::InconsistentK: return "InconsistentK";
    case Errc::ConfigSyntax: return "ConfigSyntax";
    case Errc::ConfigMissingKey: return "ConfigMissingKey";
    case Errc::ConfigBadValue: return "ConfigBadValue";
    case Errc::InvalidScenario: return "InvalidScenario";
    case Errc::Io: return "Io";
    }
    return "Unknown";
}

ErrorCategory errc_category(Errc code)
{
    switch (code) {
    case Errc::MalformedOptionLine:
    case Errc::NonMonotonicFrequency:
    case Errc::WrongValueCount:
    case Errc::EmptyFile:
    case Errc::UnsupportedVersion:
    case Errc::ConfigSyntax:
    case Errc::ConfigMissingKey:
    case Errc::ConfigBadValue:
    case Errc::InvalidScenario:
        return ErrorCategory::Parse;
    case Errc::Io:
        return ErrorCategory::Io;
    default:
        return ErrorCategory::Solver;
    }
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code), message_(message)
{
}

Error& Error::at_frequency(double hz)
{
    frequency_ = hz;
    return *this;
}

Error& Error::at_line(int line)
{
    line_ = line;
    return *this;
}

Error error_at(Errc code, double hz, const std::string& message)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "at %.9g Hz: ", hz);
    Error e(code, buf + message);
    e.at_frequency(hz);
    return e;
}

} // namespace solrcal
